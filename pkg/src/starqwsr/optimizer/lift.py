"""Shared scaffolding for the per-slot conic subproblems.

Both alternating blocks (transmit covariances with the surface fixed,
surface covariances with the transmitters fixed) maximize the same
queue-weighted sum of SIC rates through identical machinery: each rate
is bounded by an affine surrogate of log2(1 + 1/(S*I)) anchored at a
local point, the reciprocal-signal slacks S enter through rotated-cone
rows S * gain >= 1, interference slacks I through linear rows, and the
gain-ordering rows keep earlier-decoded messages stronger at every
receiver.  This module holds the local point, the surrogate, channel
normalization to a unit noise floor, and the rank-one recovery helpers;
the step modules supply only the block-specific gain forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..conic import AffineForm, as_form, solve
from ..model import (
    DecodingOrder,
    Scenario,
    StarConfig,
    achievable_rates,
    qwsr,
)

LN2 = float(np.log(2.0))
TWO_PI = 2.0 * np.pi

# Gains below this (in unit-noise terms) are treated as dark links when
# anchoring; keeps local points strictly positive at degenerate starts.
GAIN_FLOOR = 1e-12


class SubproblemError(RuntimeError):
    """A conic subproblem exited without a usable optimum.

    Carries the stage name, the solver status, and the names of the
    constraints present in the failing subproblem so callers can see
    which requirement set could not be met.
    """

    def __init__(self, stage, status, detail="", constraints=()):
        self.stage = str(stage)
        self.status = str(status)
        self.constraints = tuple(constraints)
        msg = f"{self.stage} subproblem: {self.status}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


def robust_solve(problem, tolerance: float, floor: float = 1e-6):
    """Solve, loosening the tolerance tenfold on numerical stalls.

    Near-degenerate instances (thin interiors late in the rank
    tightening, sharp anchors after many alternations) can stall just
    above a very tight tolerance; certificates of infeasibility or
    unboundedness are returned as is and never retried.
    """
    tol = tolerance
    while True:
        sol = solve(problem, tolerance=tol)
        if sol.status in ("optimal", "infeasible", "unbounded") or tol >= floor:
            return sol
        tol = min(tol * 10.0, floor)


def normalized_cascades(scenario: Scenario, chan) -> np.ndarray:
    """Per-user cascades diag(v_k) G / sqrt(noise): unit noise floor.

    All gains computed against these are in SNR units, so interference
    rows carry the constant 1 instead of sigma^2 and the conic data stay
    well scaled regardless of path loss.
    """
    scale = 1.0 / np.sqrt(scenario.noise_power)
    return np.stack([chan.cascade(k) * scale for k in range(scenario.num_users)])


def receiver_rows(scenario: Scenario, hhat: np.ndarray, star: StarConfig,
                  sequence) -> dict:
    """e_j = (d_{s_j}^H Hhat_j) per receiver: gain_kj = |e_j . w_k|^2."""
    return {
        j: star.d_vector(scenario.side_of(j)).conj() @ hhat[j]
        for j in sequence
    }


def pair_gains(scenario: Scenario, hhat: np.ndarray, star: StarConfig,
               w_all: np.ndarray, sequence) -> dict:
    """Unit-noise link gains g[(k, j)] = |d_{s_j}^H Hhat_j w_k|^2."""
    w_all = np.asarray(w_all, dtype=np.complex128)
    rows = receiver_rows(scenario, hhat, star, sequence)
    return {
        (k, j): float(np.abs(rows[j] @ w_all[k]) ** 2)
        for j in sequence
        for k in sequence
    }


@dataclass(frozen=True)
class LocalPoint:
    """Anchor values (S~, I~) per decode pair (k, j), all strictly positive.

    S~_kj is the reciprocal of k's received signal power at receiver j,
    I~_kj the residual interference there plus the unit noise floor; the
    surrogate rate rows are exact at these anchors.
    """

    s: dict
    i: dict

    def __post_init__(self):
        for name, d in (("s", self.s), ("i", self.i)):
            for key, v in d.items():
                if not np.isfinite(v) or v <= 0.0:
                    raise ValueError(
                        f"local point must be strictly positive; {name}{key} = {v}"
                    )

    @classmethod
    def from_config(cls, scenario: Scenario, chan, star: StarConfig,
                    w_all: np.ndarray, sequence, rate_users=None,
                    hhat=None) -> "LocalPoint":
        """Tight anchors at a working point (w_all, star).

        ``sequence`` lists the participating users earliest-decoded
        first; interference sums run within it.  Pairs are emitted for
        every ``rate_users`` member k (default: all of ``sequence``)
        against each decoder at or after k.  Gains are floored at
        GAIN_FLOOR so the point stays strictly positive.
        """
        if hhat is None:
            hhat = normalized_cascades(scenario, chan)
        sequence = tuple(sequence)
        if rate_users is None:
            rate_users = sequence
        g = pair_gains(scenario, hhat, star, w_all, sequence)
        s_t, i_t = {}, {}
        for a, k in enumerate(sequence):
            if k not in rate_users:
                continue
            later = sequence[a + 1:]
            for j in sequence[a:]:
                s_t[(k, j)] = 1.0 / max(g[(k, j)], GAIN_FLOOR)
                i_t[(k, j)] = 1.0 + sum(g[(i, j)] for i in later)
        return cls(s=s_t, i=i_t)


def lower_bound_rate(s, i, s_tilde, i_tilde):
    """Affine surrogate of log2(1 + 1/(s*i)) anchored at (s_tilde, i_tilde).

    The true expression is jointly convex on s, i > 0 (its Hessian is
    PSD there), so the tangent plane is exact at the anchor and a global
    under-estimate elsewhere.  Numeric inputs give a float (arrays
    broadcast); variable names or forms give an AffineForm for rows.
    """
    st, it = float(s_tilde), float(i_tilde)
    if not (st > 0.0 and it > 0.0):
        raise ValueError("anchor (s_tilde, i_tilde) must be strictly positive")
    a0 = float(np.log2(1.0 + 1.0 / (st * it)))
    cs = 1.0 / (LN2 * (st * st * it + st))
    ci = 1.0 / (LN2 * (it * it * st + it))
    symbolic = isinstance(s, (str, AffineForm)) or isinstance(i, (str, AffineForm))
    if not symbolic:
        out = a0 - cs * (np.asarray(s, dtype=np.float64) - st) \
            - ci * (np.asarray(i, dtype=np.float64) - it)
        return float(out) if np.ndim(out) == 0 else out
    form = AffineForm(a0 + cs * st + ci * it)
    form.plus(as_form(s), -cs)
    form.plus(as_form(i), -ci)
    return form


def add_rate_scaffolding(prob, sequence, rate_users, weights, local: LocalPoint,
                         gain_form) -> AffineForm:
    """Emit the R/S/I machinery shared by both steps; returns sum_k Q_k R_k.

    ``gain_form(k, j)`` must build a fresh AffineForm for the unit-noise
    gain of k's message at receiver j.  For each rate user k and each
    decoder j at or after k: a rotated-cone row S_kj * gain >= 1, a
    linear row I_kj >= (interference after k) + 1, and the surrogate
    rate row R_k <= lower_bound_rate(S_kj, I_kj, anchors).
    """
    sequence = tuple(sequence)
    obj = AffineForm()
    for a, k in enumerate(sequence):
        if k not in rate_users:
            continue
        rname = prob.add_scalar(f"R{k}")
        obj.add_scalar(rname, float(weights[k]))
        later = sequence[a + 1:]
        for j in sequence[a:]:
            sname = prob.add_scalar(f"S_{k}_{j}", lb=0.0)
            iname = prob.add_scalar(f"I_{k}_{j}", lb=0.0)
            prob.add_hyperbolic(sname, gain_form(k, j), name=f"sig_{k}_{j}")
            row = as_form(iname)
            for i in later:
                row.plus(gain_form(i, j), -1.0)
            prob.add_constraint(row, ">=", 1.0, name=f"intf_{k}_{j}")
            bound = lower_bound_rate(sname, iname, local.s[(k, j)], local.i[(k, j)])
            prob.add_constraint(as_form(rname).plus(bound, -1.0), "<=", 0.0,
                                name=f"rate_{k}_{j}")
    return obj


def add_fairness_rows(prob, sequence, gain_form) -> None:
    """Gain-ordering rows: earlier messages stronger at every receiver.

    Adjacent order pairs suffice; the full pairwise set follows by
    transitivity at each fixed receiver.
    """
    sequence = tuple(sequence)
    for a, b in zip(sequence, sequence[1:]):
        for i in sequence:
            row = gain_form(a, i).plus(gain_form(b, i), -1.0)
            prob.add_constraint(row, ">=", 0.0, name=f"fair_{a}_{b}_at_{i}")


# -- rank-one recovery ---------------------------------------------------


def leading_eigpair(mat: np.ndarray) -> tuple:
    """(lambda_1, u_1) of a Hermitian matrix."""
    vals, vecs = np.linalg.eigh(mat)
    return float(vals[-1]), vecs[:, -1]


def rank_ratio(mat: np.ndarray) -> float:
    """lambda_2 / lambda_1; near-zero matrices count as rank one."""
    vals = np.linalg.eigvalsh(mat)
    if vals.shape[0] < 2:
        return 0.0
    lam1 = float(vals[-1])
    if lam1 <= 1e-12 * max(1.0, abs(float(np.trace(mat).real))):
        return 0.0
    return max(0.0, float(vals[-2])) / lam1


def star_from_dvecs(d_r: np.ndarray, d_t: np.ndarray, protocol: str = "ES") -> StarConfig:
    """StarConfig from recovered coefficient vectors.

    Amplitudes are renormalized so beta_r + beta_t = 1 exactly; elements
    where both sides vanish get an even split.  Phases follow the
    d_s[m] = sqrt(beta) exp(-j theta) convention.
    """
    br = np.abs(np.asarray(d_r, dtype=np.complex128)) ** 2
    bt = np.abs(np.asarray(d_t, dtype=np.complex128)) ** 2
    tot = br + bt
    dark = tot <= 1e-12
    br = np.where(dark, 0.5, br / np.where(dark, 1.0, tot))
    return StarConfig(
        beta_r=br,
        beta_t=1.0 - br,
        theta_r=np.mod(-np.angle(d_r), TWO_PI),
        theta_t=np.mod(-np.angle(d_t), TWO_PI),
        protocol=protocol,
    )


def true_objective(scenario: Scenario, chan, star: StarConfig, w_all: np.ndarray,
                   order: DecodingOrder, weights, ts_alpha=None) -> tuple:
    """(qwsr, rates) of a concrete configuration under the model's SIC rates."""
    rates = achievable_rates(scenario, chan, star, w_all, order, ts_alpha=ts_alpha)
    return qwsr(np.maximum(np.asarray(weights, dtype=np.float64), 0.0), rates), rates
