"""Geometry, path loss, steering vectors, and Rician channel sampling.

The BS carries a half-wavelength uniform linear array along the x axis;
the surface is a half-wavelength uniform planar array in the y-z plane,
its M elements factored onto the most nearly square M_y x M_z grid.
Large-scale attenuation follows Pl(rho) = 28 + 22 log10(rho) + 20 log10(f_c)
dB with rho in meters and f_c in GHz.  Small-scale fading is Rician:

    X = sqrt(Pl_lin) * ( sqrt(phi/(1+phi)) X_los + sqrt(1/(1+phi)) X_nlos )

with X_nlos i.i.d. circularly-symmetric unit-variance complex normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChannelRealization, Scenario


@dataclass(frozen=True)
class Geometry:
    """Endpoint positions in meters (3-D)."""

    bs_position: tuple
    ris_position: tuple
    user_positions: tuple  # one 3-tuple per user, ordered by user id

    def __post_init__(self):
        bs = tuple(float(x) for x in self.bs_position)
        ris = tuple(float(x) for x in self.ris_position)
        ups = tuple(tuple(float(x) for x in p) for p in self.user_positions)
        object.__setattr__(self, "bs_position", bs)
        object.__setattr__(self, "ris_position", ris)
        object.__setattr__(self, "user_positions", ups)
        pts = [bs, ris, *ups]
        for i, a in enumerate(pts):
            for b in pts[i + 1 :]:
                if math.dist(a, b) <= 0:
                    raise ValueError("geometry points must be pairwise distinct")

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "Geometry":
        return cls(
            scenario.bs_position,
            scenario.ris_position,
            tuple(u.position for u in scenario.users),
        )

    def bs_ris_distance(self) -> float:
        return math.dist(self.bs_position, self.ris_position)

    def ris_user_distance(self, k: int) -> float:
        return math.dist(self.ris_position, self.user_positions[k])


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream: (seed, key) fully determines all draws."""

    seed: int
    key: tuple = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in self.key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(i) for i in ids))


def path_loss_db(distance_m: float, carrier_ghz: float) -> float:
    """28 + 22 log10(distance) + 20 log10(f_c), distance in m, f_c in GHz."""
    if distance_m <= 0 or carrier_ghz <= 0:
        raise ValueError("distance and carrier frequency must be positive")
    return 28.0 + 22.0 * math.log10(distance_m) + 20.0 * math.log10(carrier_ghz)


def path_loss_linear(distance_m: float, carrier_ghz: float) -> float:
    return 10.0 ** (-path_loss_db(distance_m, carrier_ghz) / 10.0)


def planar_factors(m: int) -> tuple:
    """(M_y, M_z) with M_y >= M_z, M_y*M_z = m, as close to square as divisors allow."""
    for d in range(int(math.isqrt(m)), 0, -1):
        if m % d == 0:
            return m // d, d
    return m, 1


def _unit(src, dst) -> np.ndarray:
    d = np.asarray(dst, dtype=np.float64) - np.asarray(src, dtype=np.float64)
    return d / np.linalg.norm(d)


def bs_steering(direction: np.ndarray, n: int) -> np.ndarray:
    """ULA along x, half-wavelength spacing: phase pi * n * u_x."""
    idx = np.arange(n)
    return np.exp(1j * math.pi * idx * direction[0])


def ris_steering(direction: np.ndarray, m: int) -> np.ndarray:
    """UPA in the y-z plane: element (m_y, m_z) has phase pi(m_y u_y + m_z u_z)."""
    my, mz = planar_factors(m)
    iy = np.arange(my)
    iz = np.arange(mz)
    phase = math.pi * (iy[None, :] * direction[1] + iz[:, None] * direction[2])
    return np.exp(1j * phase).reshape(m)


def los_components(geometry: Geometry, n: int, m: int) -> tuple:
    """Deterministic parts: G_los (M x N) and one surface-to-user row per user."""
    a_ris_bs = ris_steering(_unit(geometry.ris_position, geometry.bs_position), m)
    a_bs = bs_steering(_unit(geometry.bs_position, geometry.ris_position), n)
    g_los = np.outer(a_ris_bs, a_bs.conj())
    v_los = np.stack(
        [ris_steering(_unit(geometry.ris_position, up), m).conj() for up in geometry.user_positions]
    )
    return g_los, v_los


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)


def sample_channel(scenario: Scenario, geometry: Geometry, rng: RngStream) -> ChannelRealization:
    """One Rician draw of (G, v_1..v_K), byte-deterministic in the stream."""
    n, m = scenario.num_antennas, scenario.num_elements
    g_los, v_los = los_components(geometry, n, m)
    gen = rng.generator()

    phi_g = scenario.rician_factor_g
    pl_g = path_loss_linear(geometry.bs_ris_distance(), scenario.carrier_ghz)
    g = math.sqrt(pl_g) * (
        math.sqrt(phi_g / (1.0 + phi_g)) * g_los
        + math.sqrt(1.0 / (1.0 + phi_g)) * _complex_normal(gen, (m, n))
    )

    phi_v = scenario.rician_factor_v
    rows = []
    for k in range(scenario.num_users):
        pl_v = path_loss_linear(geometry.ris_user_distance(k), scenario.carrier_ghz)
        rows.append(
            math.sqrt(pl_v) * (
                math.sqrt(phi_v / (1.0 + phi_v)) * v_los[k]
                + math.sqrt(1.0 / (1.0 + phi_v)) * _complex_normal(gen, (m,))
            )
        )
    return ChannelRealization(g=g, v=np.stack(rows))


def reference_gain(geometry: Geometry, carrier_ghz: float) -> float:
    """Mean cascaded large-scale gain: Pl_lin(BS->RIS) * mean_k Pl_lin(RIS->user_k).

    Used to express a receive-side SNR target as a noise power:
    sigma^2 = p_max * reference_gain / 10^(snr_db/10).
    """
    pl_g = path_loss_linear(geometry.bs_ris_distance(), carrier_ghz)
    pls = [
        path_loss_linear(geometry.ris_user_distance(k), carrier_ghz)
        for k in range(len(geometry.user_positions))
    ]
    return pl_g * float(np.mean(pls))


def noise_power_from_snr(geometry: Geometry, p_max: float, snr_db: float, carrier_ghz: float) -> float:
    """sigma^2 matching a receive-referenced SNR of snr_db at full power."""
    return p_max * reference_gain(geometry, carrier_ghz) / 10.0 ** (snr_db / 10.0)
