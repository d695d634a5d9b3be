"""Homogeneous self-dual interior-point method over symmetric cones.

Solves the standard form

    minimize    c'x
    subject to  A x = b,   x in K,

with K a product of nonnegative-orthant, second-order and PSD blocks
(see :mod:`.cones`).  The homogeneous embedding tracks (x, y, z, tau,
kappa) with residuals

    r_p = A x - b tau
    r_d = -A'y + c tau - z
    r_g = b'y - c'x - kappa

driven to zero along the central path by a Mehrotra predictor-corrector
with Nesterov-Todd scaling.  tau -> positive gives an optimal pair
(x, y, z)/tau; kappa dominating tau yields a Farkas certificate.

Data is Ruiz-equilibrated before the iteration (rows of A and
cone-uniform column groups, then scalar normalizations of b and c);
termination is still certified on residuals in the original units, so
"optimal" means the unscaled solution meets the requested tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import ConeLayout, ScalingError, smat

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL = "numerical_failure"


@dataclass
class RawSolution:
    """Solver-level result in standard-form coordinates (already de-homogenized)."""

    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    tau: float
    kappa: float
    iterations: int
    pres: float
    dres: float
    relgap: float
    pobj: float
    dobj: float
    mu: float


class _Schur:
    """Assembles S = A H A' block by block, reusing compile-time structure."""

    def __init__(self, A: np.ndarray, layout: ConeLayout) -> None:
        self.m = A.shape[0]
        self.parts = []
        for blk, sl in zip(layout.blocks, layout.slices()):
            sub = np.ascontiguousarray(A[:, sl])
            if blk.kind == "psd":
                nz = np.flatnonzero(np.abs(sub).max(axis=1) > 0.0)
                mats = np.stack(
                    [smat(sub[r], blk.d, blk.is_complex) for r in nz]
                ) if nz.size else np.zeros((0, blk.d, blk.d))
                self.parts.append(("psd", blk, nz, sub[nz], mats))
            else:
                self.parts.append((blk.kind, blk, sub))

    def build(self, scaling) -> np.ndarray:
        from .cones import svec

        S = np.zeros((self.m, self.m))
        for part, sc in zip(self.parts, scaling.parts):
            if part[0] == "lp":
                _, _, B = part
                S += (B * sc.h) @ B.T
            elif part[0] == "soc":
                _, blk, B = part
                w, eta = sc.w, sc.eta
                P = B @ w
                jd = -np.ones(blk.d)
                jd[0] = 1.0
                S += 2.0 * np.outer(P, P) - eta**2 * ((B * jd) @ B.T)
            else:
                _, blk, nz, Asv, mats = part
                if nz.size == 0:
                    continue
                T = sc.T
                C = np.matmul(np.matmul(T, mats), T)
                Csv = svec(C, blk.is_complex)
                S[np.ix_(nz, nz)] += Csv @ Asv.T
        return S


def _solve_spd(S: np.ndarray, rhs: np.ndarray, jitter0: float = 0.0):
    """Solve S sol = rhs, regularizing until the residual is trustworthy.

    Near the optimum the Schur complement can pass condition 1e16; a plain
    solve then returns finite garbage without raising, so accuracy is
    judged by the relative residual and the diagonal jitter escalates
    until the (damped) solution is reliable.  Returns the best damped
    solution if no try reaches full accuracy.
    """
    m = S.shape[0]
    jitter = jitter0
    base = np.abs(np.diag(S)).max() + 1.0
    rhs_norm = np.linalg.norm(rhs) + 1e-300
    best = None
    for _ in range(8):
        try:
            M = S if jitter == 0.0 else S + jitter * base * np.eye(m)
            sol = np.linalg.solve(M, rhs)
            if np.all(np.isfinite(sol)):
                # iterative refinement against the true matrix, with the
                # regularized factor as the solver; stop if it stops helping
                prev = np.inf
                for _ in range(2):
                    resid = rhs - S @ sol
                    rn = np.linalg.norm(resid)
                    if not np.isfinite(rn) or rn >= prev:
                        break
                    corr = np.linalg.solve(M, resid)
                    cand = sol + corr
                    if not np.all(np.isfinite(cand)):
                        break
                    sol, prev = cand, rn
                relres = np.linalg.norm(rhs - S @ sol) / rhs_norm
                if np.isfinite(relres):
                    if best is None or relres < best[0]:
                        best = (relres, sol)
                    if relres <= 1e-8:
                        return sol
        except np.linalg.LinAlgError:
            pass
        jitter = max(jitter * 100.0, 1e-14)
    if best is not None:
        return best[1]
    raise ScalingError("Schur system unsolvable")


def _equilibrate(A: np.ndarray, layout: ConeLayout, iters: int = 10):
    """Ruiz row/column equilibration of A.

    Columns belonging to one SOC or PSD block share a single scale so
    the scaled variable stays in the same cone; LP columns scale
    individually.  Returns positive diagonal vectors (dr, dc) meant as
    A_scaled = dr[:, None] * A * dc[None, :].
    """
    m, n = A.shape
    dr = np.ones(m)
    dc = np.ones(n)
    if m == 0 or n == 0 or not np.any(A):
        return dr, dc
    groups: list[slice] = []
    for blk, sl in zip(layout.blocks, layout.slices()):
        if blk.kind == "lp":
            groups.extend(slice(j, j + 1) for j in range(sl.start, sl.stop))
        else:
            groups.append(sl)
    As = A.copy()
    for _ in range(iters):
        rmax = np.abs(As).max(axis=1)
        rmax[rmax == 0.0] = 1.0
        cmax = np.ones(n)
        for g in groups:
            v = np.abs(As[:, g]).max()
            if v > 0.0:
                cmax[g] = v
        if max(np.abs(rmax - 1.0).max(), np.abs(cmax - 1.0).max()) < 1e-2:
            break
        sr = 1.0 / np.sqrt(rmax)
        As *= sr[:, None]
        dr *= sr
        sc = 1.0 / np.sqrt(cmax)
        As *= sc[None, :]
        dc *= sc
    return dr, dc


def solve_standard(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    cones: list[tuple],
    tol: float = 1e-7,
    max_iters: int = 200,
) -> RawSolution:
    c0 = np.asarray(c, dtype=np.float64)
    A0 = np.asarray(A, dtype=np.float64)
    b0 = np.asarray(b, dtype=np.float64)
    layout = ConeLayout(cones)
    m, n = A0.shape
    if layout.dim != n or b0.shape[0] != m:
        raise ValueError("inconsistent standard-form dimensions")

    # equilibrated copy used by the iteration; termination is judged on
    # residuals mapped back to the original units
    dr, dc = _equilibrate(A0, layout)
    A = A0 * dr[:, None] * dc[None, :]
    b = dr * b0
    c = dc * c0
    sigma_b = 1.0 / max(1.0, np.abs(b).max()) if b.size else 1.0
    sigma_c = 1.0 / max(1.0, np.abs(c).max()) if c.size else 1.0
    b = b * sigma_b
    c = c * sigma_c

    schur = _Schur(A, layout)
    nrm_b = 1.0 + np.linalg.norm(b0)
    nrm_c = 1.0 + np.linalg.norm(c0)
    scale_A = 1.0 + (np.abs(A0).max() if A0.size else 0.0)

    x = layout.identity()
    z = layout.identity()
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    nu = layout.degree + 1.0

    def residuals():
        r_p = A @ x - b * tau
        r_d = -A.T @ y + c * tau - z
        r_g = b @ y - c @ x - kappa
        return r_p, r_d, r_g

    status = STATUS_NUMERICAL
    it = 0
    best = None

    for it in range(max_iters + 1):
        r_p, r_d, r_g = residuals()
        mu = (x @ z + tau * kappa) / nu

        xt = dc * x / (sigma_b * tau)
        yt = dr * y / (sigma_c * tau)
        zt = z / dc / (sigma_c * tau)
        pobj = c0 @ xt
        dobj = b0 @ yt
        pres = np.linalg.norm(A0 @ xt - b0) / nrm_b
        dres = np.linalg.norm(A0.T @ yt + zt - c0) / nrm_c
        gap_abs = (x @ z + tau * kappa) / (sigma_b * sigma_c * tau**2)
        relgap = gap_abs / max(1.0, abs(pobj), abs(dobj))

        cur = RawSolution(
            STATUS_NUMERICAL, xt, yt, zt, tau, kappa, it,
            pres, dres, relgap, pobj, dobj, mu,
        )
        if best is None or max(pres, dres, relgap) < max(best.pres, best.dres, best.relgap):
            best = cur

        if pres <= tol and dres <= tol and relgap <= tol:
            cur.status = STATUS_OPTIMAL
            return cur

        # Farkas certificates: A'y + z ~ 0 with b'y > 0 (primal infeasible),
        # A x ~ 0 with c'x < 0, x in K (dual infeasible / unbounded),
        # certified in original units
        y_cert = dr * y
        z_cert = z / dc
        by = b0 @ y_cert
        x_cert = dc * x
        cx = c0 @ x_cert
        if by > 0.0:
            cert = np.linalg.norm(A0.T @ y_cert + z_cert) / by
            if cert <= tol * scale_A and tau <= 1e-3 * kappa:
                yc, zc = y_cert / by, z_cert / by
                return RawSolution(
                    STATUS_INFEASIBLE, x_cert, yc, zc, tau, kappa, it,
                    np.inf, cert, np.inf, np.nan, np.nan, mu,
                )
        if cx < 0.0:
            cert = np.linalg.norm(A0 @ x_cert) / (-cx)
            if cert <= tol * scale_A and tau <= 1e-3 * kappa:
                return RawSolution(
                    STATUS_UNBOUNDED, x_cert / (-cx), y_cert, z_cert, tau, kappa, it,
                    cert, np.inf, np.inf, np.nan, np.nan, mu,
                )

        if it == max_iters:
            break

        try:
            sc = layout.scale(x, z)
            S = schur.build(sc)
            Hc = sc.H(c)
            rhs1 = b + A @ Hc
            y1 = _solve_spd(S, rhs1)
            dx1 = sc.H(A.T @ y1) - Hc
            denom_base = kappa + tau * (b @ y1 - c @ dx1)

            def newton0(xi_p, xi_d, xi_g, d_s, d_kap):
                v_s = sc.WT(sc.prod_inv_lam(d_s))
                Hxi = sc.H(xi_d)
                u = _solve_spd(S, xi_p - A @ v_s - A @ Hxi)
                dx0 = v_s + Hxi + sc.H(A.T @ u)
                dtau = (d_kap - tau * (b @ u - c @ dx0 - xi_g)) / denom_base
                dy = u + dtau * y1
                dx = dx0 + dtau * dx1
                dz = c * dtau - A.T @ dy - xi_d
                dkap = (d_kap - kappa * dtau) / tau
                return dx, dy, dz, dtau, dkap

            def newton(xi_p, xi_d, xi_g, d_s, d_kap):
                # refinement rounds against the full Newton system; the
                # elimination above loses digits once mu is small
                cur = newton0(xi_p, xi_d, xi_g, d_s, d_kap)
                prev_err = np.inf
                for _ in range(3):
                    dx, dy, dz, dt, dk = cur
                    r1 = xi_p - (A @ dx - b * dt)
                    r2 = xi_d - (c * dt - A.T @ dy - dz)
                    r3 = xi_g - (b @ dy - c @ dx - dk)
                    r4 = d_s - sc.prod(sc.lam, sc.WinvT(dx) + sc.W(dz))
                    r5 = d_kap - (kappa * dt + tau * dk)
                    err = max(
                        np.abs(r1).max() if r1.size else 0.0,
                        np.abs(r4).max() if r4.size else 0.0,
                        abs(r3),
                        abs(r5),
                    )
                    if not np.isfinite(err) or err >= 0.5 * prev_err:
                        break
                    corr = newton0(r1, r2, r3, r4, r5)
                    cand = tuple(a + e for a, e in zip(cur, corr))
                    if not all(np.all(np.isfinite(q)) for q in cand):
                        break
                    cur, prev_err = cand, err
                return cur

            lam_sq = sc.lam_sq()

            # predictor
            dxa, dya, dza, dta, dka = newton(-r_p, -r_d, -r_g, -lam_sq, -tau * kappa)
            dlx = sc.WinvT(dxa)
            dlz = sc.W(dza)
            a_max = min(sc.step_to_boundary(dlx), sc.step_to_boundary(dlz))
            if dta < 0.0:
                a_max = min(a_max, -tau / dta)
            if dka < 0.0:
                a_max = min(a_max, -kappa / dka)
            a_aff = min(1.0, a_max)
            mu_aff = (
                (x + a_aff * dxa) @ (z + a_aff * dza)
                + (tau + a_aff * dta) * (kappa + a_aff * dka)
            ) / nu
            sigma = min(max((max(mu_aff, 0.0) / mu) ** 3, 1e-8), 0.999)

            # corrector with Mehrotra second-order term
            corr = sc.prod(dlx, dlz)
            e = sc.identity()
            d_s = sigma * mu * e - lam_sq - corr
            d_kap = sigma * mu - tau * kappa - dta * dka
            f = 1.0 - sigma
            dx, dy, dz, dt, dk = newton(-f * r_p, -f * r_d, -f * r_g, d_s, d_kap)

            dlx = sc.WinvT(dx)
            dlz = sc.W(dz)
            a_max = min(sc.step_to_boundary(dlx), sc.step_to_boundary(dlz))
            if dt < 0.0:
                a_max = min(a_max, -tau / dt)
            if dk < 0.0:
                a_max = min(a_max, -kappa / dk)
            alpha = min(1.0, 0.99 * a_max)
            if alpha <= 1e-10:
                break

            x = x + alpha * dx
            y = y + alpha * dy
            z = z + alpha * dz
            tau += alpha * dt
            kappa += alpha * dk
        except ScalingError:
            break

    out = best if best is not None else cur
    out.status = STATUS_NUMERICAL
    out.iterations = it
    return out
