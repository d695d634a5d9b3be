"""Transmit-covariance block: optimize the beamformers with the surface fixed.

The lifted subproblem is a semidefinite program in the per-user
covariances W_k with the rank constraint dropped; at its optimum every
W_k is rank one anyway (the dual forces each to sit in a rank-one face),
so the beamformers come straight from the leading eigenpairs.
"""

from __future__ import annotations

import numpy as np

from ..conic import AffineForm, ConicProblem, solve
from ..model import DecodingOrder, Scenario
from .lift import (
    LocalPoint,
    SubproblemError,
    add_fairness_rows,
    add_rate_scaffolding,
    leading_eigpair,
    normalized_cascades,
    rank_ratio,
    receiver_rows,
    robust_solve,
    true_objective,
)

RANK_TOL_W = 1e-6


def active_step(scenario: Scenario, chan, star_fixed, order: DecodingOrder,
                weights, local: LocalPoint, *, sequence=None, ts_alpha=None,
                tolerance: float = 1e-8, hhat=None):
    """One beamformer block solve; returns (w_all, new local point, objective).

    ``sequence`` restricts the subproblem to a user subset (earliest
    decoded first; defaults to the full order); users outside it get
    zero beamformers.  The returned objective is the model's achieved
    queue-weighted sum rate at (w_all, star_fixed), and the new local
    point is anchored there.  Every recovered covariance must be rank
    one within RANK_TOL_W.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if sequence is None:
        sequence = order.sequence
    sequence = tuple(sequence)
    if hhat is None:
        hhat = normalized_cascades(scenario, chan)
    rate_users = tuple(k for k in sequence if weights[k] > 0.0)
    n = scenario.num_antennas

    rows = receiver_rows(scenario, hhat, star_fixed, sequence)
    coeff = {j: np.outer(e.conj(), e) for j, e in rows.items()}  # Hhat^H d d^H Hhat

    prob = ConicProblem()
    for k in sequence:
        prob.add_psd_block(f"W{k}", n)

    def gain_form(k, j):
        return AffineForm().add_block(f"W{k}", coeff[j])

    obj = add_rate_scaffolding(prob, sequence, rate_users, weights, local, gain_form)
    add_fairness_rows(prob, sequence, gain_form)
    power = AffineForm()
    for k in sequence:
        power.add_block(f"W{k}", np.eye(n, dtype=np.complex128))
    prob.add_constraint(power, "<=", scenario.p_max, name="power")
    prob.set_objective("max", obj)

    sol = robust_solve(prob, tolerance)
    # near-binary surfaces leave some receivers with vanishing gain rows;
    # the endgame then stalls just shy of certification, which is fine
    # because acceptance compares true objectives and the rank ladder
    # below still gates the recovery
    ok = sol.status == "optimal" or (
        sol.status == "numerical_failure"
        and max(float(v) for v in sol.residuals.values())
        <= max(100.0 * tolerance, 1e-5))
    if not ok:
        raise SubproblemError("active", sol.status,
                              detail=f"residuals {sol.residuals}",
                              constraints=[c[0] for c in prob.constraints])

    def worst_ratio(s):
        return max(rank_ratio(s.blocks[f"W{k}"]) for k in sequence)

    # the optimum is rank one in exact arithmetic; a near-miss is solver
    # noise, so re-solve tighter before giving up
    ratio = worst_ratio(sol)
    tighter = tolerance
    while ratio > RANK_TOL_W and tighter > 1e-11:
        tighter /= 10.0
        cand = solve(prob, tolerance=tighter)
        if cand.status != "optimal":
            break
        sol, ratio = cand, worst_ratio(cand)
    if ratio > RANK_TOL_W:
        raise SubproblemError("active", "rank",
                              detail=f"lambda2/lambda1 = {ratio:.2e}")

    w_all = np.zeros((scenario.num_users, n), dtype=np.complex128)
    for k in sequence:
        lam, u = leading_eigpair(sol.blocks[f"W{k}"])
        w_all[k] = np.sqrt(max(lam, 0.0)) * u

    objective, _ = true_objective(scenario, chan, star_fixed, w_all, order,
                                  weights, ts_alpha=ts_alpha)
    new_local = LocalPoint.from_config(scenario, chan, star_fixed, w_all,
                                       sequence, rate_users=rate_users, hhat=hhat)
    return w_all, new_local, objective
