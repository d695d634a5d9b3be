"""Reference schemes: pinned-split surfaces and orthogonal access.

The split-surface and even-split baselines reuse the alternating solver
with frozen amplitudes (the passive block then optimizes phases only).
Orthogonal access gives every user a resource fraction varpi_k with no
inter-user interference; beamforming reduces to per-user matched
filters, and the power / share allocation is a jointly concave problem
solved exactly per sweep.
"""

from __future__ import annotations

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
    effective_gain,
    oma_rate,
)
from .es import ACCEPT_SLACK, bcd_es
from .lift import LN2, LocalPoint, SubproblemError, normalized_cascades
from .ms import ETA_CAP, binary_penalty, binary_violation
from .passive import solve_passive
from .starts import initial_star, matched_filters
from .ts import cophase_gain


def conv_ris(scenario: Scenario, chan, weights, order: DecodingOrder,
             **knobs) -> BeamformingSolution:
    """Two conventional surfaces: front half reflects, back half transmits."""
    m = scenario.num_elements
    if m % 2:
        raise ValueError("the split-surface baseline needs an even element count")
    beta_r = np.zeros(m)
    beta_r[: m // 2] = 1.0
    pins = {REFLECTION: beta_r, TRANSMISSION: 1.0 - beta_r}
    return bcd_es(scenario, chan, weights, order, beta_fixed=pins, **knobs)


def ues(scenario: Scenario, chan, weights, order: DecodingOrder,
        **knobs) -> BeamformingSolution:
    """Uniform even split: every element sends half its energy each way."""
    half = np.full(scenario.num_elements, 0.5)
    pins = {REFLECTION: half, TRANSMISSION: half.copy()}
    return bcd_es(scenario, chan, weights, order, beta_fixed=pins, **knobs)


# -- orthogonal access ---------------------------------------------------


def _water_fill(weights, varpi, ghat, p_max: float) -> np.ndarray:
    """Powers p_k = varpi_k [Q_k/(nu ln2) - 1/ghat_k]^+ with sum p = p_max.

    ghat is the per-unit-power gain over noise; nu is the water level
    multiplier found by bisection (the total is decreasing in nu).
    """
    act = (weights > 0.0) & (varpi > 0.0) & (ghat > 0.0)
    p = np.zeros_like(ghat, dtype=np.float64)
    if not act.any():
        return p
    g_safe = np.where(act, ghat, 1.0)

    def levels(nu):
        lv = varpi * np.maximum(weights / (nu * LN2) - 1.0 / g_safe, 0.0)
        return np.where(act, lv, 0.0)

    hi = float(np.max(weights[act] * ghat[act])) / LN2
    lo = hi
    for _ in range(200):
        lo /= 2.0
        if levels(lo).sum() >= p_max:
            break
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if levels(mid).sum() >= p_max:
            lo = mid
        else:
            hi = mid
    p = levels(lo)
    total = p.sum()
    if total > p_max > 0.0:
        p *= p_max / total
    return p


def _oma_objective(weights, ghat, p, varpi) -> float:
    """sum_k Q_k varpi_k log2(1 + p_k ghat_k / varpi_k), zero-share safe."""
    out = 0.0
    for q, g, pk, v in zip(weights, ghat, p, varpi):
        if q > 0.0 and v > 0.0 and g > 0.0:
            out += q * v * math.log2(1.0 + pk * g / v)
    return out


def _golden_max(f, lo: float, hi: float, iters: int = 80):
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - ratio * (b - a)
    x2 = a + ratio * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - ratio * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + ratio * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    return x, f(x)


def _price_shares(weights, c) -> np.ndarray:
    """Exact maximizer of sum_k Q_k v_k log2(1 + c_k / v_k) on the simplex.

    Marginal utilities are strictly decreasing, so each share responds
    monotonically to a common price mu and the simplex budget pins mu by
    bisection (used for three or more active users).
    """
    weights = np.asarray(weights, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    act = np.flatnonzero((weights > 0.0) & (c > 0.0))
    v = np.zeros_like(c)
    if act.size == 0:
        return v
    if act.size == 1:
        v[act[0]] = 1.0
        return v

    def marginal(k, vk):
        x = c[k] / vk
        return weights[k] * (math.log2(1.0 + x) - x / (LN2 * (1.0 + x)))

    def share(k, mu):
        if marginal(k, 1.0) >= mu:
            return 1.0
        lo, hi = 1e-14, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if marginal(k, mid) >= mu:
                lo = mid
            else:
                hi = mid
        return lo

    mu_hi = max(marginal(k, 1e-14) for k in act)
    mu_lo = min(marginal(k, 1.0) for k in act)
    for _ in range(100):
        mu = 0.5 * (mu_lo + mu_hi)
        total = sum(share(k, mu) for k in act)
        if total >= 1.0:
            mu_lo = mu
        else:
            mu_hi = mu
    raw = np.array([share(k, mu_lo) for k in act])
    v[act] = raw / raw.sum()
    return v


def _allocate(weights, ghat, p_max: float):
    """Joint power/share optimum for orthogonal access.

    Two active users reduce to a concave 1-D search over the first
    user's share with the power split water-filled inside; larger sets
    alternate water-filling with the price-based share update.
    """
    weights = np.asarray(weights, dtype=np.float64)
    ghat = np.asarray(ghat, dtype=np.float64)
    act = np.flatnonzero((weights > 0.0) & (ghat > 0.0))
    varpi = np.zeros_like(ghat)
    if act.size == 0:
        return np.zeros_like(ghat), varpi
    if act.size == 1:
        varpi[act[0]] = 1.0
        return _water_fill(weights, varpi, ghat, p_max), varpi
    if act.size == 2:
        a, b = act

        def build(t):
            v = np.zeros_like(ghat)
            v[a], v[b] = t, 1.0 - t
            return v

        def value(t):
            v = build(t)
            p = _water_fill(weights, v, ghat, p_max)
            return _oma_objective(weights, ghat, p, v)

        t_best, _ = _golden_max(value, 0.0, 1.0)
        varpi = build(t_best)
        return _snap_dust(_water_fill(weights, varpi, ghat, p_max), varpi)

    varpi[act] = 1.0 / act.size
    p = _water_fill(weights, varpi, ghat, p_max)
    for _ in range(60):
        new = _price_shares(weights, p * ghat)
        p = _water_fill(weights, new, ghat, p_max)
        if np.max(np.abs(new - varpi)) <= 1e-10:
            varpi = new
            break
        varpi = new
    return _snap_dust(p, varpi)


def _snap_dust(p, varpi, floor: float = 1e-9):
    # near-zero shares would otherwise seed degenerate rate rows downstream
    dead = varpi < floor
    varpi = np.where(dead, 0.0, varpi)
    return np.where(dead, 0.0, p), varpi


def _oma_alternate(scenario: Scenario, chan, weights, star0: StarConfig, *,
                   order, pins=None, eta=None, eps, l_max, passive_tol,
                   rank_exit, max_srocr_rounds, hhat):
    """Orthogonal-access alternation: matched directions and exact power/
    share allocation against the surface block.

    ``eta`` switches acceptance to the penalized objective (true value
    minus eta times the exact binary deviation); ``pins`` freezes the
    amplitude split.  Returns (w, varpi, star, best true value, trace).
    """
    weights = np.asarray(weights, dtype=np.float64)
    noise = scenario.noise_power
    star_cur = star0
    w_cur = np.zeros((scenario.num_users, scenario.num_antennas),
                     dtype=np.complex128)
    varpi = np.zeros(scenario.num_users)
    best_true = 0.0
    penal = (lambda s: eta * binary_penalty(s)) if eta is not None else (lambda s: 0.0)
    best = -penal(star_cur)
    trace = [best]
    for _ in range(l_max):
        dirs = matched_filters(scenario, chan, star_cur)
        ghat = np.array([
            effective_gain(scenario, chan, star_cur, k, dirs[k]) / noise
            for k in range(scenario.num_users)
        ])
        p, varpi_new = _allocate(weights, ghat, scenario.p_max)
        w_new = dirs * np.sqrt(p)[:, None]
        true_new = float(sum(
            weights[k] * oma_rate(scenario, chan, star_cur, k, w_new[k],
                                  float(varpi_new[k]))
            for k in range(scenario.num_users) if weights[k] > 0.0))
        cand = true_new - penal(star_cur)
        if cand >= best - ACCEPT_SLACK:
            w_cur, varpi = w_new, varpi_new
            best, best_true = max(best, cand), true_new

        rate_users = tuple(k for k in range(scenario.num_users)
                           if weights[k] > 0.0 and varpi[k] > 1e-12)
        if rate_users:
            local = LocalPoint.from_config(
                scenario, chan, star_cur, w_cur, order.sequence,
                rate_users=rate_users, hhat=hhat)
            try:
                res = solve_passive(
                    scenario, chan, w_cur, order, weights, local,
                    beta_fixed=pins, oma_varpi=varpi,
                    penalty=None if eta is None
                    else (eta, {s: star_cur.beta(s) for s in SIDES}),
                    star_protocol=star0.protocol, tolerance=passive_tol,
                    rank_exit=rank_exit, max_rounds=max_srocr_rounds,
                    hhat=hhat)
            except SubproblemError:
                break
            cand = res.objective - penal(res.star)
            if cand >= best - ACCEPT_SLACK:
                star_cur = res.star
                best, best_true = max(best, cand), res.objective

        trace.append(best)
        frac = (trace[-1] - trace[-2]) / max(abs(trace[-2]), 1e-12)
        if frac <= eps:
            break
    return w_cur, varpi, star_cur, best_true, tuple(trace)


def _oma_time_share(scenario: Scenario, chan, weights) -> BeamformingSolution:
    """Orthogonal access under time switching.

    Each user's slice gets the whole surface, so the per-user solves are
    the dedicated closed forms and the slice split is a linear program:
    all time goes to the largest weighted dedicated rate.
    """
    weights = np.asarray(weights, dtype=np.float64)
    K, m = scenario.num_users, scenario.num_elements
    noise = scenario.noise_power
    r_ded = np.zeros(K)
    w_ded = np.zeros((K, scenario.num_antennas), dtype=np.complex128)
    th_ded = [np.zeros(m)] * K
    traces = []
    for k in range(K):
        if weights[k] <= 0.0:
            continue
        w_k, theta_k, gains = cophase_gain(scenario, chan, k)
        r_ded[k] = math.log2(1.0 + gains[-1] / noise)
        w_ded[k], th_ded[k] = w_k, theta_k
        traces.append(tuple(weights[k] * math.log2(1.0 + g / noise)
                            for g in gains))

    scores = weights * r_ded
    k_star = int(np.argmax(scores)) if scores.max() > 0.0 else None
    w_all = np.zeros_like(w_ded)
    thetas = {s: np.zeros(m) for s in SIDES}
    rates = np.zeros(K)
    alpha = (1.0, 0.0)
    if k_star is not None:
        w_all[k_star] = w_ded[k_star]
        side = scenario.side_of(k_star)
        thetas[side] = th_ded[k_star]
        rates[k_star] = r_ded[k_star]
        alpha = (1.0, 0.0) if side == REFLECTION else (0.0, 1.0)
    star = StarConfig(beta_r=np.ones(m), beta_t=np.ones(m),
                      theta_r=thetas[REFLECTION], theta_t=thetas[TRANSMISSION],
                      protocol="TS")
    order = DecodingOrder(tuple(scenario.users_on(REFLECTION))
                          + tuple(scenario.users_on(TRANSMISSION)))
    qwsr_val = float(scores.max()) if k_star is not None else 0.0
    if traces:
        span = max(len(t) for t in traces)
        padded = [t + (t[-1],) * (span - len(t)) for t in traces]
        trace = tuple(max(col) for col in zip(*padded)) + (qwsr_val,)
    else:
        trace = (0.0,)
    return BeamformingSolution(w=w_all, star=star, order=order, rates=rates,
                               qwsr=qwsr_val, trace=trace, ts_allocation=alpha)


def oma(scenario: Scenario, chan, weights, order: DecodingOrder | None = None,
        *, protocol: str | None = None, rng=0, eps=None, l_max=None,
        passive_tol: float = 1e-7, rank_exit: float = 1e-4,
        max_srocr_rounds: int = 12) -> BeamformingSolution:
    """Orthogonal multiple access under the chosen surface protocol.

    Users never share a resource slice, so decoding order is irrelevant
    (the ``order`` argument is accepted for interface symmetry).  The
    returned rates follow varpi_k log2(1 + g_k / (varpi_k sigma^2)) for
    the frequency-split protocols and slice-scaled dedicated rates for
    time switching.
    """
    weights = np.asarray(weights, dtype=np.float64)
    proto = protocol or scenario.protocol
    if proto == "TS":
        return _oma_time_share(scenario, chan, weights)

    tol = scenario.tol
    eps = tol.eps if eps is None else eps
    l_max = tol.l_max if l_max is None else l_max
    hhat = normalized_cascades(scenario, chan)
    id_order = DecodingOrder(tuple(range(scenario.num_users)))
    common = dict(order=id_order, eps=eps, l_max=l_max,
                  passive_tol=passive_tol, rank_exit=rank_exit,
                  max_srocr_rounds=max_srocr_rounds, hhat=hhat)
    star0 = initial_star(scenario, rng=rng)

    if proto == "ES":
        w, varpi, star, _, trace = _oma_alternate(
            scenario, chan, weights, star0, **common)
    else:  # MS: penalty escalation, exact rounding, frozen refinement
        eta, star_cur, w = tol.eta0, star0, None
        while True:
            w, varpi, star_cur, _, _ = _oma_alternate(
                scenario, chan, weights, star_cur, eta=eta, **common)
            if binary_violation(star_cur) <= tol.eps2_tilde:
                break
            eta *= tol.zeta
            if eta > ETA_CAP:
                raise SubproblemError(
                    "penalty", "stalled",
                    detail=f"amplitudes non-binary at eta={eta:.2e}")
        beta_r = np.where(star_cur.beta_r >= 0.5, 1.0, 0.0)
        pins = {REFLECTION: beta_r, TRANSMISSION: 1.0 - beta_r}
        star_cur = StarConfig(beta_r=pins[REFLECTION], beta_t=pins[TRANSMISSION],
                              theta_r=star_cur.theta_r, theta_t=star_cur.theta_t,
                              protocol="MS")
        w, varpi, star, _, trace = _oma_alternate(
            scenario, chan, weights, star_cur, pins=pins, **common)

    rates = np.array([
        oma_rate(scenario, chan, star, k, w[k], float(varpi[k]))
        for k in range(scenario.num_users)
    ])
    return BeamformingSolution(w=w, star=star, order=id_order, rates=rates,
                               qwsr=float(np.maximum(weights, 0.0) @ rates),
                               trace=trace)


oma.order_invariant = True
