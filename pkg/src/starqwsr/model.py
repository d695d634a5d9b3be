"""System model: scenario data, surface configs, SIC rates, feasibility checks.

Conventions used throughout the package:

* A user on side s sees the cascaded channel v_k Theta_s G with
  Theta_s = diag(sqrt(beta_s) * exp(j theta_s)).  Writing
  H_k = diag(v_k) G (M x N) and d_s[m] = sqrt(beta_s[m]) e^{-j theta_s[m]},
  the received amplitude is d_s^H H_k w, so the effective gain
  |v_k Theta_s G w|^2 equals |d_s^H H_k w|^2 = Tr(W H_k^H D_s H_k)
  with W = w w^H and D_s = d_s d_s^H.  All optimization modules work on
  the (W, D) lift; this module owns the equivalence.
* Decoding orders list user ids earliest-first; a user's message is
  decoded (and cancelled) by every user at the same or a later position,
  so interference at any decoder comes only from later positions.
* Rates are spectral efficiencies (bits/s/Hz); queues hold rate*tau units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

REFLECTION = "reflection"
TRANSMISSION = "transmission"
SIDES = (REFLECTION, TRANSMISSION)
PROTOCOLS = ("ES", "MS", "TS")

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Tolerances:
    """Algorithm knobs shared by the per-slot optimizers.

    eps      - block-coordinate outer loop objective tolerance
    eps1     - inner SCA objective tolerance (passive/active subloops)
    eps2     - rank-ratio exit threshold for the eigenvalue-ratio relaxation
    eps1_tilde / eps2_tilde - penalty loop objective / binariness tolerances
    eta0, zeta - initial penalty weight and its growth factor
    gamma0, delta0 - initial rank-ratio target and its increment
    l_max    - iteration cap applied to each loop
    """

    eps: float = 1e-4
    eps1: float = 1e-3
    eps2: float = 1e-3
    eps1_tilde: float = 1e-3
    eps2_tilde: float = 1e-3
    eta0: float = 0.1
    zeta: float = 10.0
    gamma0: float = 0.0
    delta0: float = 0.1
    l_max: int = 50

    def __post_init__(self):
        for name in ("eps", "eps1", "eps2", "eps1_tilde", "eps2_tilde", "eta0", "delta0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"tolerance {name} must be positive")
        if self.zeta <= 1:
            raise ValueError("penalty growth factor zeta must exceed 1")
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be nonnegative")
        if self.l_max < 1:
            raise ValueError("l_max must be at least 1")


@dataclass(frozen=True)
class UserSpec:
    id: int
    side: str
    position: tuple

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"user side must be one of {SIDES}, got {self.side!r}")
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        if len(self.position) != 3:
            raise ValueError("user position must be 3-D")


@dataclass(frozen=True)
class Scenario:
    """Static problem data for one experiment."""

    num_antennas: int
    num_elements: int
    users: tuple
    bs_position: tuple
    ris_position: tuple
    p_max: float
    noise_power: float
    arrival_rates: tuple
    carrier_ghz: float = 2.0
    rician_factor_g: float = 10.0 ** 0.3
    rician_factor_v: float = 10.0 ** 0.3
    slot_seconds: float = 1e-3
    protocol: str = "ES"
    snr_db: float = 5.0
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "bs_position", tuple(float(p) for p in self.bs_position))
        object.__setattr__(self, "ris_position", tuple(float(p) for p in self.ris_position))
        object.__setattr__(self, "arrival_rates", tuple(float(a) for a in self.arrival_rates))
        if self.num_antennas < 1 or self.num_elements < 1:
            raise ValueError("need at least one antenna and one surface element")
        if self.p_max <= 0 or self.noise_power <= 0 or self.slot_seconds <= 0:
            raise ValueError("p_max, noise_power and slot_seconds must be positive")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        ids = [u.id for u in self.users]
        if sorted(ids) != list(range(len(self.users))):
            raise ValueError("user ids must be 0..K-1")
        if len(self.arrival_rates) != len(self.users):
            raise ValueError("arrival_rates length must match user count")
        if self.protocol in ("ES", "MS") and len(self.users) >= 2:
            sides = {u.side for u in self.users}
            if sides != set(SIDES):
                raise ValueError("ES/MS scenarios with K >= 2 need users on both sides")

    @property
    def num_users(self) -> int:
        return len(self.users)

    def side_of(self, k: int) -> str:
        return self.users[k].side

    def users_on(self, side: str) -> list:
        return [u.id for u in self.users if u.side == side]


@dataclass(frozen=True)
class ChannelRealization:
    """One fading draw: g is M x N (BS to surface), v is K x M (surface to users)."""

    g: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.complex128)
        v = np.asarray(self.v, dtype=np.complex128)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "v", v)
        if g.ndim != 2 or v.ndim != 2 or v.shape[1] != g.shape[0]:
            raise ValueError("channel dimensions inconsistent: v is K x M, g is M x N")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(v))):
            raise ValueError("channel entries must be finite")

    def cascade(self, k: int) -> np.ndarray:
        """H_k = diag(v_k) g, the M x N cascade seen by user k before the surface."""
        return self.v[k][:, None] * self.g


@dataclass(frozen=True)
class StarConfig:
    """Surface amplitudes and phases for both sides.

    ES/MS: beta_r[m] + beta_t[m] = 1 elementwise (checked to 1e-9, then
    renormalized exactly).  TS: each side's amplitude vector is uniform
    0s or 1s and describes that side's own period.  Phases are wrapped
    to [0, 2pi); amplitudes are clamped to [0, 1] with 1e-9 tolerance.
    """

    beta_r: np.ndarray
    beta_t: np.ndarray
    theta_r: np.ndarray
    theta_t: np.ndarray
    protocol: str = "ES"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        br = np.asarray(self.beta_r, dtype=np.float64).copy()
        bt = np.asarray(self.beta_t, dtype=np.float64).copy()
        tr = np.mod(np.asarray(self.theta_r, dtype=np.float64), TWO_PI)
        tt = np.mod(np.asarray(self.theta_t, dtype=np.float64), TWO_PI)
        if not (br.shape == bt.shape == tr.shape == tt.shape) or br.ndim != 1:
            raise ValueError("beta/theta vectors must share one length M")
        for b in (br, bt):
            if np.any(b < -1e-9) or np.any(b > 1 + 1e-9):
                raise ValueError("amplitudes outside [0,1] beyond tolerance")
        np.clip(br, 0.0, 1.0, out=br)
        np.clip(bt, 0.0, 1.0, out=bt)
        if self.protocol in ("ES", "MS"):
            s = br + bt
            if np.any(np.abs(s - 1.0) > 1e-9):
                raise ValueError("energy conservation violated beyond 1e-9")
            br = br / s
            bt = 1.0 - br
        object.__setattr__(self, "beta_r", br)
        object.__setattr__(self, "beta_t", bt)
        object.__setattr__(self, "theta_r", tr)
        object.__setattr__(self, "theta_t", tt)

    @property
    def num_elements(self) -> int:
        return self.beta_r.shape[0]

    def beta(self, side: str) -> np.ndarray:
        return self.beta_r if side == REFLECTION else self.beta_t

    def theta(self, side: str) -> np.ndarray:
        return self.theta_r if side == REFLECTION else self.theta_t

    def d_vector(self, side: str) -> np.ndarray:
        """d_s with d_s[m] = sqrt(beta_s[m]) exp(-j theta_s[m]); see module docstring."""
        return np.sqrt(self.beta(side)) * np.exp(-1j * self.theta(side))


@dataclass(frozen=True)
class DecodingOrder:
    """User ids listed earliest-decoded first."""

    sequence: tuple

    def __post_init__(self):
        seq = tuple(int(k) for k in self.sequence)
        object.__setattr__(self, "sequence", seq)
        if sorted(seq) != list(range(len(seq))):
            raise ValueError("decoding order must be a permutation of 0..K-1")

    def position(self, k: int) -> int:
        return self.sequence.index(k)

    def later_than(self, k: int) -> tuple:
        """Users decoded strictly after k (the residual interferers for k)."""
        return self.sequence[self.position(k) + 1 :]

    def at_or_after(self, k: int) -> tuple:
        """Users that must decode k's message: k itself and everyone later."""
        return self.sequence[self.position(k) :]


@dataclass(frozen=True)
class BeamformingSolution:
    """Per-slot output: beamformers, surface config, order, rates, objective trace."""

    w: np.ndarray  # K x N complex
    star: StarConfig
    order: DecodingOrder
    rates: np.ndarray
    qwsr: float
    trace: tuple = ()
    ts_allocation: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=np.complex128))
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=np.float64))
        object.__setattr__(self, "trace", tuple(float(t) for t in self.trace))
        if self.ts_allocation is not None:
            a = tuple(float(x) for x in self.ts_allocation)
            if len(a) != 2 or min(a) < -1e-9 or abs(sum(a) - 1.0) > 1e-9:
                raise ValueError("ts_allocation must be (alpha_r, alpha_t) summing to 1")
            object.__setattr__(self, "ts_allocation", a)

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))


# -- evaluation ---------------------------------------------------------


def effective_gain(scenario: Scenario, chan: ChannelRealization, star: StarConfig,
                   rx: int, w: np.ndarray) -> float:
    """|v_rx Theta_{s_rx} G w|^2: power of beamformer w at receiver rx."""
    w = np.asarray(w, dtype=np.complex128)
    if w.shape != (scenario.num_antennas,):
        raise ValueError(f"beamformer must have shape ({scenario.num_antennas},)")
    if chan.v.shape != (scenario.num_users, scenario.num_elements):
        raise ValueError("channel does not match scenario dimensions")
    d = star.d_vector(scenario.side_of(rx))
    amp = d.conj() @ (chan.cascade(rx) @ w)
    return float(np.abs(amp) ** 2)


def lifted_gain(scenario: Scenario, chan: ChannelRealization, star: StarConfig,
                rx: int, w: np.ndarray) -> float:
    """Same quantity through the (W, D) trace lift; agrees with effective_gain to 1e-9."""
    w = np.asarray(w, dtype=np.complex128)
    d = star.d_vector(scenario.side_of(rx))
    H = chan.cascade(rx)
    W = np.outer(w, w.conj())
    D = np.outer(d, d.conj())
    return float(np.trace(W @ H.conj().T @ D @ H).real)


def _interferers(scenario: Scenario, order: DecodingOrder, k: int, j: int) -> tuple:
    later = order.later_than(k)
    if scenario.protocol == "TS":
        side = scenario.side_of(j)
        later = tuple(i for i in later if scenario.side_of(i) == side)
    return later


def sinr(scenario: Scenario, chan: ChannelRealization, star: StarConfig,
         w_all: np.ndarray, order: DecodingOrder, k: int, j: int) -> float:
    """SINR of user k's message when decoded at receiver j.

    Requires position(k) <= position(j): SIC decoders only process
    messages at or before their own position.  Interference comes from
    users decoded after k (restricted to j's side under TS, where the
    other side transmits in the other period).
    """
    if order.position(k) > order.position(j):
        raise ValueError("decoder j must sit at or after user k in the order")
    w_all = np.asarray(w_all, dtype=np.complex128)
    sig = effective_gain(scenario, chan, star, j, w_all[k])
    denom = scenario.noise_power
    for i in _interferers(scenario, order, k, j):
        denom += effective_gain(scenario, chan, star, j, w_all[i])
    return sig / denom


def achievable_rates(scenario: Scenario, chan: ChannelRealization, star: StarConfig,
                     w_all: np.ndarray, order: DecodingOrder,
                     ts_alpha: tuple | None = None) -> np.ndarray:
    """Per-user SIC rates: R_k = min over decoders at-or-after k of log2(1+SINR_kj).

    Under TS the decoder set is restricted to k's own side and each
    side's rates scale by its period share ts_alpha = (alpha_r, alpha_t).
    """
    K = scenario.num_users
    rates = np.zeros(K)
    if scenario.protocol == "TS":
        if ts_alpha is None:
            raise ValueError("TS rates need ts_alpha = (alpha_r, alpha_t)")
        share = {REFLECTION: ts_alpha[0], TRANSMISSION: ts_alpha[1]}
    for k in range(K):
        decoders = order.at_or_after(k)
        if scenario.protocol == "TS":
            decoders = [j for j in decoders if scenario.side_of(j) == scenario.side_of(k)]
        worst = min(sinr(scenario, chan, star, w_all, order, k, j) for j in decoders)
        rates[k] = math.log2(1.0 + worst)
        if scenario.protocol == "TS":
            rates[k] *= share[scenario.side_of(k)]
    return rates


def qwsr(queues: Sequence[float], rates: Sequence[float]) -> float:
    """Queue-weighted sum rate sum_k Q_k R_k (the per-slot drift-bound objective)."""
    q = np.asarray(queues, dtype=np.float64)
    r = np.asarray(rates, dtype=np.float64)
    if q.shape != r.shape:
        raise ValueError("queues and rates must have matching length")
    if np.any(q < 0):
        raise ValueError("queues must be nonnegative")
    return float(q @ r)


def oma_rate(scenario: Scenario, chan: ChannelRealization, star: StarConfig,
             k: int, w: np.ndarray, varpi: float) -> float:
    """Orthogonal-access rate: varpi * log2(1 + gain / (varpi * sigma^2))."""
    if varpi < 0 or varpi > 1 + 1e-12:
        raise ValueError("resource share varpi must lie in [0, 1]")
    if varpi == 0.0:
        return 0.0
    g = effective_gain(scenario, chan, star, k, w)
    return float(varpi * math.log2(1.0 + g / (varpi * scenario.noise_power)))


# -- validation ---------------------------------------------------------


def validate_star(star: StarConfig, protocol: str | None = None) -> list:
    """Protocol feasibility of a surface config; empty list means ok."""
    proto = protocol or star.protocol
    out = []
    for name, b in (("beta_r", star.beta_r), ("beta_t", star.beta_t)):
        if np.any(b < 0) or np.any(b > 1):
            out.append(f"{name} outside [0,1] by {max(np.max(-b), np.max(b - 1)):.3e}")
    if proto in ("ES", "MS"):
        dev = np.abs(star.beta_r + star.beta_t - 1.0).max()
        if dev > 1e-9:
            out.append(f"energy conservation off by {dev:.3e}")
    if proto == "MS":
        slack = np.minimum(star.beta_r, 1.0 - star.beta_r).max()
        if slack > 1e-9:
            out.append(f"MS amplitudes non-binary by {slack:.3e}")
    if proto == "TS":
        for name, b in (("beta_r", star.beta_r), ("beta_t", star.beta_t)):
            if not (np.all(np.abs(b) <= 1e-9) or np.all(np.abs(b - 1.0) <= 1e-9)):
                out.append(f"TS {name} must be uniformly 0 or 1")
    return out


def check_fairness(scenario: Scenario, chan: ChannelRealization, star: StarConfig,
                   w_all: np.ndarray, order: DecodingOrder, tol: float = 1e-9) -> list:
    """Gain-ordering conditions for SIC: earlier messages must arrive stronger.

    For every receiver i and every pair with position(k) < position(j),
    |v_i Theta G w_k|^2 >= |v_i Theta G w_j|^2.  Returns (i, k, j, deficit)
    for each violation; deficit is relative to the local power scale.
    """
    w_all = np.asarray(w_all, dtype=np.complex128)
    K = scenario.num_users
    ts = scenario.protocol == "TS"
    bad = []
    for i in range(K):
        gains = [effective_gain(scenario, chan, star, i, w_all[k]) for k in range(K)]
        for a, k in enumerate(order.sequence):
            for j in order.sequence[a + 1 :]:
                if ts and not (
                    scenario.side_of(k) == scenario.side_of(j) == scenario.side_of(i)
                ):
                    continue  # periods are orthogonal; only same-side SIC applies
                scale = gains[k] + gains[j] + scenario.noise_power
                deficit = (gains[j] - gains[k]) / scale
                if deficit > tol:
                    bad.append((i, k, j, deficit))
    return bad


__all__ = [
    "REFLECTION",
    "TRANSMISSION",
    "SIDES",
    "PROTOCOLS",
    "Tolerances",
    "UserSpec",
    "Scenario",
    "ChannelRealization",
    "StarConfig",
    "DecodingOrder",
    "BeamformingSolution",
    "effective_gain",
    "lifted_gain",
    "sinr",
    "achievable_rates",
    "qwsr",
    "oma_rate",
    "validate_star",
    "check_fairness",
    "replace",
]
