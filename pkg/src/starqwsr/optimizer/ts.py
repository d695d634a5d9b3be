"""Time-switching solver: dedicate the surface per side, then split the slot.

During a side's period every element serves that side at full amplitude,
so the two side subproblems decouple completely and each is a smaller
instance of the alternating solve (a closed-form matched-filter /
phase-alignment alternation when the side has a single user).  The
period split alpha is then a linear program over the two weighted side
objectives, whose optimum sits at a vertex; ties break toward the
reflection side.
"""

from __future__ import annotations

import dataclasses
import itertools
import math

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
from .es import bcd_es
from .lift import TWO_PI, SubproblemError, true_objective


def cophase_gain(scenario: Scenario, chan, k: int, *, iters: int = 64,
                 rel_tol: float = 1e-12):
    """Single-user full-surface solve for user k.

    Alternates the matched filter w = sqrt(P) (d^H H)^H / |d^H H| with
    the aligning phases theta_m = -arg((H w)_m); both half-steps are
    exact maximizers, so the gain sequence is nondecreasing.  Returns
    (w, theta, gain trace) with the gain |d^H H w|^2 after each sweep.
    """
    h = chan.cascade(k)
    n = scenario.num_antennas
    d = np.ones(scenario.num_elements, dtype=np.complex128)
    theta = np.zeros(scenario.num_elements)
    w = np.zeros(n, dtype=np.complex128)
    trace = []
    for _ in range(iters):
        a = (d.conj() @ h).conj()
        nrm = np.linalg.norm(a)
        if nrm <= 0.0:
            w = np.zeros(n, dtype=np.complex128)
            w[0] = math.sqrt(scenario.p_max)
            trace.append(0.0)
            break
        w = (math.sqrt(scenario.p_max) / nrm) * a
        y = h @ w
        theta = np.mod(-np.angle(y), TWO_PI)
        d = np.exp(-1j * theta)
        gain = float(np.sum(np.abs(y)) ** 2)
        trace.append(gain)
        if len(trace) >= 2 and trace[-1] - trace[-2] <= rel_tol * max(1.0, trace[-2]):
            break
    return w, theta, tuple(trace)


def dedicated_gain(scenario: Scenario, chan, k: int, *, rng=0, knobs=None):
    """Best single-user channel gain with the whole surface and budget.

    Runs the matched-filter / co-phasing alternation and then polishes
    its fixed point with a pinned conic solve of user k's side: each
    half-step of the alternation is exact, but the joint phase profile
    it settles on can sit a fraction below the conic optimum.  Returns
    (w, theta, gain trace) like cophase_gain with the polish appended;
    the trace stays nondecreasing and the polish is dropped whenever it
    fails or does not improve.
    """
    knobs = dict(knobs or {})
    w_k, theta, gains = cophase_gain(scenario, chan, k)
    if gains[-1] <= 0.0:
        return w_k, theta, gains
    if scenario.protocol != "TS":
        scenario = dataclasses.replace(scenario, protocol="TS")
    side = scenario.side_of(k)
    m = scenario.num_elements
    other_side = TRANSMISSION if side == REFLECTION else REFLECTION
    pins = {side: np.ones(m), other_side: np.zeros(m)}
    ts_alpha = (1.0, 0.0) if side == REFLECTION else (0.0, 1.0)
    th = {side: theta, other_side: np.zeros(m)}
    star0 = StarConfig(beta_r=pins[REFLECTION], beta_t=pins[TRANSMISSION],
                       theta_r=th[REFLECTION], theta_t=th[TRANSMISSION],
                       protocol="TS")
    w0 = np.zeros((scenario.num_users, scenario.num_antennas),
                  dtype=np.complex128)
    w0[k] = w_k
    wts = np.zeros(scenario.num_users)
    wts[k] = 1.0
    od = DecodingOrder(tuple(i for i in range(scenario.num_users) if i != k)
                       + (k,))
    try:
        sol = bcd_es(scenario, chan, wts, od, sequence=(k,), beta_fixed=pins,
                     ts_alpha=ts_alpha, star_protocol="TS",
                     start=(w0, star0), rng=rng, **knobs)
    except SubproblemError:
        return w_k, theta, gains
    noise = scenario.noise_power
    polished = tuple(noise * (2.0 ** r - 1.0) for r in sol.trace)
    if polished[-1] > gains[-1]:
        return sol.w[k], sol.star.theta(side), gains + polished
    return w_k, theta, gains


def _side_solution(scenario: Scenario, chan, weights, side: str, *, rng,
                   order_cap, knobs):
    """Full-time subproblem of one side.

    Returns (w rows by user, theta, weighted objective, objective trace,
    decode sequence) with the whole surface and power budget dedicated
    to the side's positive-weight users.
    """
    m = scenario.num_elements
    users = scenario.users_on(side)
    live = [k for k in users if weights[k] > 0.0]
    idle = tuple(k for k in users if weights[k] <= 0.0)
    if not live:
        return {}, np.zeros(m), 0.0, (0.0,), idle

    if len(live) == 1:
        k = live[0]
        w_k, theta, gains = dedicated_gain(scenario, chan, k, rng=rng,
                                           knobs=knobs)
        rates = [weights[k] * math.log2(1.0 + g / scenario.noise_power)
                 for g in gains]
        return {k: w_k}, theta, rates[-1], tuple(rates), idle + (k,)

    other = tuple(u.id for u in scenario.users if u.side != side)
    pins = {side: np.ones(m),
            (TRANSMISSION if side == REFLECTION else REFLECTION): np.zeros(m)}
    ts_alpha = (1.0, 0.0) if side == REFLECTION else (0.0, 1.0)
    wts = np.where([scenario.side_of(k) == side
                    for k in range(scenario.num_users)], weights, 0.0)
    if math.factorial(len(live)) > order_cap:
        raise ValueError(
            f"{len(live)}! side orders exceed the cap of {order_cap}")
    best, best_seq = None, None
    for perm in itertools.permutations(live):
        od = DecodingOrder(idle + perm + other)
        sol = bcd_es(scenario, chan, wts, od, sequence=perm, beta_fixed=pins,
                     ts_alpha=ts_alpha, star_protocol="TS", rng=rng, **knobs)
        if best is None or sol.qwsr > best.qwsr:
            best, best_seq = sol, perm
    rows = {k: best.w[k] for k in live}
    return rows, best.star.theta(side), best.qwsr, best.trace, idle + best_seq


def ts_solve(scenario: Scenario, chan, weights, *, rng=0, order_cap: int = 24,
             **knobs) -> BeamformingSolution:
    """Time-switching solve: per-side subproblems plus the period split.

    The returned allocation is always a vertex of the simplex (the
    objective is linear in alpha); the trace is the running elementwise
    max of the two weighted side traces, so it is nondecreasing whenever
    both side solves are.  The scenario's protocol is normalized to TS
    so rate evaluations use per-side decoding and the period split.
    """
    if scenario.protocol != "TS":
        scenario = dataclasses.replace(scenario, protocol="TS")
    weights = np.asarray(weights, dtype=np.float64)
    m = scenario.num_elements
    w_all = np.zeros((scenario.num_users, scenario.num_antennas),
                     dtype=np.complex128)
    thetas, objs, traces, seqs = {}, {}, {}, {}
    for side in SIDES:
        rows, theta, obj, trace, seq = _side_solution(
            scenario, chan, weights, side, rng=rng, order_cap=order_cap,
            knobs=knobs)
        for k, row in rows.items():
            w_all[k] = row
        thetas[side], objs[side], traces[side], seqs[side] = (
            theta, obj, trace, seq)

    alpha = ((1.0, 0.0) if objs[REFLECTION] >= objs[TRANSMISSION]
             else (0.0, 1.0))
    star = StarConfig(beta_r=np.ones(m), beta_t=np.ones(m),
                      theta_r=thetas[REFLECTION], theta_t=thetas[TRANSMISSION],
                      protocol="TS")
    order = DecodingOrder(seqs[REFLECTION] + seqs[TRANSMISSION])
    qwsr_val, rates = true_objective(scenario, chan, star, w_all, order,
                                     weights, ts_alpha=alpha)

    tr_r, tr_t = traces[REFLECTION], traces[TRANSMISSION]
    span = max(len(tr_r), len(tr_t))

    def padded(t):
        return t + (t[-1],) * (span - len(t))

    trace = tuple(max(a, b) for a, b in zip(padded(tr_r), padded(tr_t)))
    return BeamformingSolution(w=w_all, star=star, order=order, rates=rates,
                               qwsr=qwsr_val, trace=trace + (qwsr_val,),
                               ts_allocation=alpha)
