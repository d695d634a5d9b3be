"""Finite-resolution surface configurations.

Practical elements hold phases on a uniform b-bit grid and amplitudes
on a halving ladder; snapping a converged configuration to those grids
measures the price of finite control resolution.
"""

from __future__ import annotations

import numpy as np

from ..model import TWO_PI, StarConfig


def quantize_star(star: StarConfig, phase_bits: int | None,
                  amp_bits: int | None = None) -> StarConfig:
    """Snap a configuration to its nearest grid points.

    Phases quantize to the 2^b uniform grid on [0, 2pi).  Amplitudes
    (when ``amp_bits`` is given) snap beta_r to the nearest level in
    {0} | {2^-j : j = 0 .. 2^amp_bits - 2} with beta_t = 1 - beta_r;
    time-switching configs snap each side independently (their uniform
    0/1 amplitudes are already on the ladder).  ``None`` skips that
    component, so quantize_star(star, None, None) is the identity.
    """
    theta_r, theta_t = star.theta_r, star.theta_t
    if phase_bits is not None:
        if phase_bits < 1:
            raise ValueError("phase_bits must be at least 1")
        step = TWO_PI / (1 << int(phase_bits))
        theta_r = np.mod(np.round(star.theta_r / step) * step, TWO_PI)
        theta_t = np.mod(np.round(star.theta_t / step) * step, TWO_PI)

    beta_r, beta_t = star.beta_r, star.beta_t
    if amp_bits is not None:
        if amp_bits < 1:
            raise ValueError("amp_bits must be at least 1")
        ladder = np.concatenate(
            [[0.0], 2.0 ** -np.arange((1 << int(amp_bits)) - 1)])
        ladder = np.sort(ladder)

        def snap(b):
            idx = np.argmin(np.abs(b[:, None] - ladder[None, :]), axis=1)
            return ladder[idx]

        if star.protocol == "TS":
            beta_r, beta_t = snap(star.beta_r), snap(star.beta_t)
        else:
            beta_r = snap(star.beta_r)
            beta_t = 1.0 - beta_r

    return StarConfig(beta_r=beta_r, beta_t=beta_t, theta_r=theta_r,
                      theta_t=theta_t, protocol=star.protocol)
