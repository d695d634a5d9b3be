"""Mode-switching solver: a growing penalty drives the amplitude split binary.

The binary requirement beta(1-beta) = 0 per element is moved into the
objective through its affine overestimate anchored at the previous
amplitudes (exact at the anchor), so each inner sweep maximizes a
tangent lower bound of the penalized objective and accepted values
cannot decrease.  The penalty weight grows geometrically until every
element's violation beta(1-beta) clears the binariness threshold; the
amplitudes are then rounded exactly and the phases and beamformers are
re-refined with the split frozen.
"""

from __future__ import annotations

import numpy as np

from ..model import (
    REFLECTION,
    SIDES,
    TRANSMISSION,
    BeamformingSolution,
    DecodingOrder,
    Scenario,
    StarConfig,
)
from .active import active_step
from .es import ACCEPT_SLACK, bcd_es
from .lift import LocalPoint, SubproblemError, normalized_cascades, true_objective
from .passive import solve_passive
from .starts import initial_solution

ETA_CAP = 1e8


def binary_penalty(star: StarConfig) -> float:
    """sum_m beta(1 - beta) over both sides; zero iff the split is binary."""
    return float(np.sum(star.beta_r * (1.0 - star.beta_r))
                 + np.sum(star.beta_t * (1.0 - star.beta_t)))


def binary_violation(star: StarConfig) -> float:
    """max_m beta(1 - beta), the penalty loop's exit measure."""
    return float(max(np.max(star.beta_r * (1.0 - star.beta_r)),
                     np.max(star.beta_t * (1.0 - star.beta_t))))


def _penalized_bcd(scenario: Scenario, chan, weights, order: DecodingOrder,
                   w0, star0, eta: float, *, sequence, hhat, eps, l_max,
                   active_tol, passive_tol, rank_exit, max_srocr_rounds):
    """Alternating sweeps at one fixed penalty weight.

    Returns (w, star, trace) where trace holds the accepted penalized
    objective (model QWSR minus eta times the exact binary deviation)
    after each sweep; the acceptance rule makes it nondecreasing.
    """
    weights = np.asarray(weights, dtype=np.float64)
    rate_users = tuple(k for k in sequence if weights[k] > 0.0)
    w_cur = np.array(w0, dtype=np.complex128)
    star_cur = star0
    local = LocalPoint.from_config(scenario, chan, star_cur, w_cur, sequence,
                                   rate_users=rate_users, hhat=hhat)
    qwsr_cur, _ = true_objective(scenario, chan, star_cur, w_cur, order, weights)
    best = qwsr_cur - eta * binary_penalty(star_cur)
    trace = [best]
    for _ in range(l_max):
        # a failed beamformer half-step only freezes w for this sweep;
        # the surface half-step carries the binarization and must run
        try:
            w_new, local_new, obj_new = active_step(
                scenario, chan, star_cur, order, weights, local,
                sequence=sequence, tolerance=active_tol, hhat=hhat)
            cand = obj_new - eta * binary_penalty(star_cur)
            if cand >= best - ACCEPT_SLACK:
                w_cur, local = w_new, local_new
                best = max(best, cand)
        except SubproblemError:
            pass

        try:
            anchors = {s: star_cur.beta(s) for s in SIDES}
            res = solve_passive(
                scenario, chan, w_cur, order, weights, local,
                sequence=sequence, penalty=(eta, anchors),
                tolerance=passive_tol, rank_exit=rank_exit,
                max_rounds=max_srocr_rounds, hhat=hhat)
            cand = res.objective - eta * binary_penalty(res.star)
            if cand >= best - ACCEPT_SLACK:
                star_cur, local = res.star, res.local
                best = max(best, cand)
        except SubproblemError:
            break
        trace.append(best)
        frac = (trace[-1] - trace[-2]) / max(abs(trace[-2]), 1e-12)
        if frac <= eps:
            break
    return w_cur, star_cur, tuple(trace)


def ms_penalty(scenario: Scenario, chan, weights, order: DecodingOrder, *,
               start=None, rng=0, eps=None, l_max=None, eta_cap: float = ETA_CAP,
               active_tol: float = 1e-8, passive_tol: float = 1e-7,
               rank_exit: float = 1e-4,
               max_srocr_rounds: int = 12) -> BeamformingSolution:
    """Binary-split solve at a fixed decoding order.

    The penalty weight starts at tol.eta0 and is scaled by tol.zeta
    whenever the inner alternation converges with some beta(1-beta)
    above tol.eps2_tilde; past ``eta_cap`` the run is abandoned as a
    flagged failure.  The returned trace is the frozen-split refinement
    phase's true-objective trace and the star validates as binary.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if not isinstance(order, DecodingOrder):
        order = DecodingOrder(tuple(order))
    sequence = order.sequence
    tol = scenario.tol
    eps = tol.eps1_tilde if eps is None else eps
    l_max = tol.l_max if l_max is None else l_max
    hhat = normalized_cascades(scenario, chan)

    if start is None:
        w_cur, star_cur = initial_solution(scenario, chan, order, rng=rng,
                                           weights=weights)
    elif isinstance(start, BeamformingSolution):
        w_cur, star_cur = np.array(start.w), start.star
    else:
        w_cur, star_cur = np.array(start[0], dtype=np.complex128), start[1]

    eta = tol.eta0
    while True:
        w_cur, star_cur, _ = _penalized_bcd(
            scenario, chan, weights, order, w_cur, star_cur, eta,
            sequence=sequence, hhat=hhat, eps=eps, l_max=l_max,
            active_tol=active_tol, passive_tol=passive_tol,
            rank_exit=rank_exit, max_srocr_rounds=max_srocr_rounds)
        if binary_violation(star_cur) <= tol.eps2_tilde:
            break
        eta *= tol.zeta
        if eta > eta_cap:
            raise SubproblemError(
                "penalty", "stalled",
                detail=f"amplitudes non-binary at eta={eta:.2e}")

    beta_r = np.where(star_cur.beta_r >= 0.5, 1.0, 0.0)
    pins = {REFLECTION: beta_r, TRANSMISSION: 1.0 - beta_r}
    star_rounded = StarConfig(beta_r=pins[REFLECTION], beta_t=pins[TRANSMISSION],
                              theta_r=star_cur.theta_r, theta_t=star_cur.theta_t,
                              protocol="MS")
    # an entirely dark side cannot carry a surface block; its users keep
    # zero beamformers and the model charges them zero rate
    live = tuple(k for k in sequence
                 if pins[scenario.side_of(k)].max() > 0.0)
    return bcd_es(scenario, chan, weights, order, start=(w_cur, star_rounded),
                  beta_fixed=pins, sequence=live, star_protocol="MS",
                  eps=eps, l_max=l_max, active_tol=active_tol,
                  passive_tol=passive_tol, rank_exit=rank_exit,
                  max_srocr_rounds=max_srocr_rounds)
