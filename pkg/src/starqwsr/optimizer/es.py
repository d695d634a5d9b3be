"""Energy-splitting solver: alternate beamformer and surface blocks.

Each half-step maximizes a tangent lower bound anchored at the current
point, so its optimum cannot fall below the current true objective; a
candidate is additionally accepted only if the model objective did not
decrease, which makes the reported trace nondecreasing by construction.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from ..model import BeamformingSolution, DecodingOrder, Scenario
from .active import active_step
from .lift import LocalPoint, SubproblemError, normalized_cascades, true_objective
from .passive import solve_passive
from .starts import initial_solution

ACCEPT_SLACK = 1e-9


def bcd_es(scenario: Scenario, chan, weights, order: DecodingOrder, *,
           start=None, rng=0, beta_fixed=None, sequence=None, ts_alpha=None,
           eps=None, l_max=None, active_tol: float = 1e-8,
           passive_tol: float = 1e-7, rank_exit: float = 1e-4,
           max_srocr_rounds: int = 12, star_protocol: str = "ES") -> BeamformingSolution:
    """Alternating solve at a fixed decoding order.

    ``beta_fixed`` pins the surface amplitudes (even-split and
    conventional-surface baselines; single sides for time switching);
    ``sequence``/``ts_alpha`` restrict the decode chain and scale rates
    for per-side subproblems.  ``start`` accepts a previous solution or
    a (w, star) pair for warm starting; otherwise matched filters with
    a fairness-consistent power profile are used.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if not isinstance(order, DecodingOrder):
        order = DecodingOrder(tuple(order))
    if sequence is None:
        sequence = order.sequence
    sequence = tuple(sequence)
    eps = scenario.tol.eps if eps is None else eps
    l_max = scenario.tol.l_max if l_max is None else l_max
    hhat = normalized_cascades(scenario, chan)

    if start is None:
        w_cur, star_cur = initial_solution(scenario, chan, order, rng=rng,
                                           beta_fixed=beta_fixed,
                                           weights=weights)
    elif isinstance(start, BeamformingSolution):
        w_cur, star_cur = np.array(start.w), start.star
    else:
        w_cur, star_cur = np.array(start[0], dtype=np.complex128), start[1]

    rate_users = tuple(k for k in sequence if weights[k] > 0.0)
    local = LocalPoint.from_config(scenario, chan, star_cur, w_cur, sequence,
                                   rate_users=rate_users, hhat=hhat)
    best, _ = true_objective(scenario, chan, star_cur, w_cur, order, weights,
                             ts_alpha=ts_alpha)
    trace = [best]

    for _ in range(l_max):
        # near-degenerate configurations can push a subproblem past
        # float64 reach; a failure there ends the sweep at the last
        # accepted configuration, which keeps every recorded invariant
        try:
            w_new, local_new, obj_new = active_step(
                scenario, chan, star_cur, order, weights, local,
                sequence=sequence, ts_alpha=ts_alpha, tolerance=active_tol,
                hhat=hhat)
            if obj_new >= best - ACCEPT_SLACK:
                w_cur, local = w_new, local_new
                best = max(best, obj_new)

            res = solve_passive(
                scenario, chan, w_cur, order, weights, local,
                sequence=sequence, beta_fixed=beta_fixed, ts_alpha=ts_alpha,
                star_protocol=star_protocol, tolerance=passive_tol,
                rank_exit=rank_exit, max_rounds=max_srocr_rounds, hhat=hhat)
            if res.objective >= best - ACCEPT_SLACK:
                star_cur, local = res.star, res.local
                best = max(best, res.objective)
        except SubproblemError:
            break

        trace.append(best)
        frac = (trace[-1] - trace[-2]) / max(abs(trace[-2]), 1e-12)
        if frac <= eps:
            break

    # final beamformer polish at the converged surface
    try:
        w_new, local_new, obj_new = active_step(
            scenario, chan, star_cur, order, weights, local,
            sequence=sequence, ts_alpha=ts_alpha, tolerance=active_tol, hhat=hhat)
    except SubproblemError:
        pass
    else:
        if obj_new >= best - ACCEPT_SLACK:
            w_cur, local = w_new, local_new
            best = max(best, obj_new)
    trace.append(best)

    qwsr_final, rates = true_objective(scenario, chan, star_cur, w_cur, order,
                                       weights, ts_alpha=ts_alpha)
    return BeamformingSolution(
        w=w_cur, star=star_cur, order=order, rates=rates, qwsr=qwsr_final,
        trace=tuple(trace),
        ts_allocation=tuple(ts_alpha) if ts_alpha is not None else None)


def all_orders(num_users: int, cap: int = 24):
    """Every decoding order, lexicographic; error past the cap."""
    if math.factorial(num_users) > cap:
        raise ValueError(
            f"{num_users}! orders exceed the cap of {cap}; "
            "fix an order explicitly for larger user counts")
    return [DecodingOrder(p) for p in itertools.permutations(range(num_users))]


def order_search(scenario: Scenario, chan, weights, solver_fn, *,
                 cap: int = 24) -> BeamformingSolution:
    """Best solver_fn(scenario, chan, weights, order) over every order.

    Solvers whose result cannot depend on the order (orthogonal access,
    per-side searches) may declare ``order_invariant = True`` on the
    callable and run exactly once with the identity order.
    """
    if getattr(solver_fn, "order_invariant", False):
        identity = DecodingOrder(tuple(range(scenario.num_users)))
        return solver_fn(scenario, chan, weights, identity)
    best = None
    for od in all_orders(scenario.num_users, cap=cap):
        sol = solver_fn(scenario, chan, weights, od)
        if best is None or sol.qwsr > best.qwsr:
            best = sol
    return best


def es_multistart(scenario: Scenario, chan, weights, *, order=None,
                  extra_starts=(), rng=0, order_cap: int = 24,
                  **knobs) -> BeamformingSolution:
    """Best alternating solve over decoding orders and warm starts.

    Runs the canonical start for each order (all permutations when
    ``order`` is None), then one warm run from each solution in
    ``extra_starts`` under its own order, and returns the maximizer.
    Warm runs start at the given configuration, so the result is never
    below any extra start's objective.
    """
    if order is not None:
        orders = [order if isinstance(order, DecodingOrder)
                  else DecodingOrder(tuple(order))]
    else:
        orders = all_orders(scenario.num_users, cap=order_cap)
    best = None
    for od in orders:
        sol = bcd_es(scenario, chan, weights, od, rng=rng, **knobs)
        if best is None or sol.qwsr > best.qwsr:
            best = sol
    for st in extra_starts:
        sol = bcd_es(scenario, chan, weights, st.order, start=st, rng=rng,
                     **knobs)
        if sol.qwsr > best.qwsr:
            best = sol
    return best
