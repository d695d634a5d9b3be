"""Starting points for the alternating solvers.

The surface starts at an even split (or the pinned amplitudes) with
random phases; beamformers start as matched filters to the effective
channels with a geometric power profile along the decoding sequence,
steep enough that the gain-ordering conditions hold at the start.
"""

from __future__ import annotations

import numpy as np

from ..channel import RngStream
from ..model import (
    REFLECTION,
    TRANSMISSION,
    DecodingOrder,
    Scenario,
    StarConfig,
    check_fairness,
)
from .lift import TWO_PI, true_objective


def as_generator(rng) -> np.random.Generator:
    """int seed, RngStream or Generator -> Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).child(90).generator()


def initial_star(scenario: Scenario, rng=0, beta_fixed=None) -> StarConfig:
    """Even-split (or pinned) amplitudes with uniform random phases."""
    gen = as_generator(rng)
    m = scenario.num_elements
    theta_r = gen.uniform(0.0, TWO_PI, size=m)
    theta_t = gen.uniform(0.0, TWO_PI, size=m)
    if beta_fixed is None:
        beta_r = np.full(m, 0.5)
        beta_t = np.full(m, 0.5)
    else:
        beta_r = np.asarray(beta_fixed.get(REFLECTION, np.zeros(m)), dtype=np.float64)
        beta_t = np.asarray(beta_fixed.get(TRANSMISSION, np.zeros(m)), dtype=np.float64)
    return StarConfig(beta_r=beta_r, beta_t=beta_t,
                      theta_r=theta_r, theta_t=theta_t, protocol="ES")


def matched_filters(scenario: Scenario, chan, star: StarConfig) -> np.ndarray:
    """Unit-norm matched filters to each user's effective channel."""
    K, n = scenario.num_users, scenario.num_antennas
    dirs = np.zeros((K, n), dtype=np.complex128)
    for k in range(K):
        h = (star.d_vector(scenario.side_of(k)).conj() @ chan.cascade(k)).conj()
        nrm = np.linalg.norm(h)
        if nrm > 0:
            dirs[k] = h / nrm
        else:
            dirs[k, 0] = 1.0
    return dirs


def initial_solution(scenario: Scenario, chan, order: DecodingOrder,
                     rng=0, beta_fixed=None, weights=None):
    """(w, star) start: matched filters with a geometric power profile.

    The ratio between consecutive users' powers along the decoding
    sequence is shrunk until the gain-ordering check passes (earlier
    messages must arrive stronger everywhere); if no ratio in the scan
    works the steepest profile is returned as a best effort.  When
    ``weights`` are given, a corner profile (all power on the first
    decoded user) competes with the geometric one by true objective, so
    heavy-weight single-user optima are reachable basins.
    """
    star = initial_star(scenario, rng=rng, beta_fixed=beta_fixed)
    dirs = matched_filters(scenario, chan, star)
    K = scenario.num_users
    pos = np.array([order.position(k) for k in range(K)])

    def with_ratio(r: float) -> np.ndarray:
        p = r ** pos
        p *= scenario.p_max / p.sum()
        return dirs * np.sqrt(p)[:, None]

    w_geo = None
    for r in np.geomspace(1.0, 1e-4, 25):
        w = with_ratio(float(r))
        if not check_fairness(scenario, chan, star, w, order):
            w_geo = w
            break
    if w_geo is None:
        w_geo = with_ratio(1e-4)
    if weights is None:
        return w_geo, star

    w_corner = np.zeros_like(dirs)
    first = order.sequence[0]
    w_corner[first] = np.sqrt(scenario.p_max) * dirs[first]
    if check_fairness(scenario, chan, star, w_corner, order):
        return w_geo, star
    val_geo, _ = true_objective(scenario, chan, star, w_geo, order, weights)
    val_cor, _ = true_objective(scenario, chan, star, w_corner, order, weights)
    return (w_corner, star) if val_cor > val_geo else (w_geo, star)
