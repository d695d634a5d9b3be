"""Symmetric-cone kernels for the interior-point solver.

The solver works on a concatenation of cone blocks:

* ``("lp", n)``        - nonnegative orthant of dimension n
* ``("soc", d)``       - second-order cone {(t, u): t >= ||u||}, full dim d >= 2
* ("psd", d, complex)  - d x d positive semidefinite matrices, real symmetric
                         or complex Hermitian, stored in svec coordinates

svec packs a matrix into a real vector so that Tr(A B) = svec(A) . svec(B):
diagonal entries first, then sqrt(2)-scaled upper off-diagonals (real parts,
then imaginary parts for Hermitian blocks).  A Hermitian d x d block has d*d
real coordinates, a real symmetric block d(d+1)/2.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _offdiag_indices(dim: int) -> tuple[np.ndarray, np.ndarray]:
    iu = np.triu_indices(dim, k=1)
    return iu[0], iu[1]


def svec_dim(dim: int, is_complex: bool) -> int:
    return dim * dim if is_complex else dim * (dim + 1) // 2


_SQRT2 = np.sqrt(2.0)


def svec(mat: np.ndarray, is_complex: bool) -> np.ndarray:
    """Pack one symmetric/Hermitian matrix (or a batch, leading axes kept)."""
    d = mat.shape[-1]
    ii, jj = _offdiag_indices(d)
    diag = mat[..., np.arange(d), np.arange(d)].real
    off = mat[..., ii, jj]
    if is_complex:
        return np.concatenate(
            [diag, _SQRT2 * off.real, _SQRT2 * off.imag], axis=-1
        )
    return np.concatenate([diag, _SQRT2 * off.real], axis=-1)


def smat(vec: np.ndarray, dim: int, is_complex: bool) -> np.ndarray:
    """Inverse of :func:`svec` for a single vector."""
    ii, jj = _offdiag_indices(dim)
    noff = ii.size
    if is_complex:
        out = np.zeros((dim, dim), dtype=np.complex128)
        off = (vec[dim : dim + noff] + 1j * vec[dim + noff :]) / _SQRT2
        out[ii, jj] = off
        out[jj, ii] = off.conj()
    else:
        out = np.zeros((dim, dim), dtype=np.float64)
        off = vec[dim:] / _SQRT2
        out[ii, jj] = off
        out[jj, ii] = off
    out[np.arange(dim), np.arange(dim)] = vec[:dim]
    return out


class ScalingError(RuntimeError):
    """An iterate left the cone interior; NT scaling is undefined."""


def _soc_J(v: np.ndarray) -> np.ndarray:
    out = -v.copy()
    out[0] = v[0]
    return out


class _LpBlock:
    kind = "lp"

    def __init__(self, n: int) -> None:
        self.n = n
        self.sdim = n
        self.degree = n

    def identity(self) -> np.ndarray:
        return np.ones(self.n)

    def interior_margin(self, x: np.ndarray) -> float:
        return float(x.min()) if self.n else np.inf

    def scale(self, x: np.ndarray, z: np.ndarray) -> "_LpScaling":
        if self.n and (x.min() <= 0.0 or z.min() <= 0.0):
            raise ScalingError("LP iterate left the positive orthant")
        return _LpScaling(x, z)


class _LpScaling:
    def __init__(self, x: np.ndarray, z: np.ndarray) -> None:
        self.w = np.sqrt(x / z)
        self.lam = np.sqrt(x * z)
        self.h = x / z

    def W(self, v):
        return self.w * v

    def WT(self, v):
        return self.w * v

    def WinvT(self, v):
        return v / self.w

    def H(self, v):
        return self.h * v

    def prod(self, a, b):
        return a * b

    def prod_inv_lam(self, d):
        return d / self.lam

    def lam_sq(self):
        return self.lam**2

    def identity(self):
        return np.ones(self.lam.shape[0])

    def mu_contrib(self):
        return float(self.lam @ self.lam)

    def step_to_boundary(self, dlam: np.ndarray) -> float:
        neg = dlam < 0
        if not neg.any():
            return np.inf
        return float((-self.lam[neg] / dlam[neg]).min())


class _SocBlock:
    kind = "soc"

    def __init__(self, d: int) -> None:
        if d < 2:
            raise ValueError("SOC dimension must be >= 2")
        self.d = d
        self.sdim = d
        self.degree = 1

    def identity(self) -> np.ndarray:
        e = np.zeros(self.d)
        e[0] = 1.0
        return e

    def interior_margin(self, x: np.ndarray) -> float:
        return float(x[0] - np.linalg.norm(x[1:]))

    def scale(self, x: np.ndarray, z: np.ndarray) -> "_SocScaling":
        resx = x[0] ** 2 - x[1:] @ x[1:]
        resz = z[0] ** 2 - z[1:] @ z[1:]
        if resx <= 0.0 or resz <= 0.0 or x[0] <= 0.0 or z[0] <= 0.0:
            raise ScalingError("SOC iterate left the cone interior")
        return _SocScaling(x, z, resx, resz)


class _SocScaling:
    # Scaling point w solves P(w) z = x with P(u) = 2uu' - (u'Ju)J (the
    # quadratic representation); then W = P(w^{1/2}), H = W^2 = P(w).
    def __init__(self, x, z, resx, resz) -> None:
        sx, sz = np.sqrt(resx), np.sqrt(resz)
        xb, zb = x / sx, z / sz
        gamma = np.sqrt((1.0 + xb @ zb) / 2.0)
        self.eta = eta = np.sqrt(sx / sz)
        self.w = w = eta * (xb + _soc_J(zb)) / (2.0 * gamma)
        u = np.empty_like(w)
        u[0] = np.sqrt((w[0] + eta) / 2.0)  # Jordan square root of w
        u[1:] = w[1:] / (2.0 * u[0])
        self.u = u
        self.lam = self.W(z)

    def W(self, q):
        u = self.u
        return 2.0 * u * (u @ q) - self.eta * _soc_J(q)

    def WT(self, q):
        return self.W(q)

    def WinvT(self, q):
        ju = _soc_J(self.u)
        return (2.0 / self.eta**2) * ju * (ju @ q) - _soc_J(q) / self.eta

    def H(self, q):
        w = self.w
        return 2.0 * w * (w @ q) - self.eta**2 * _soc_J(q)

    def prod(self, a, b):
        out = np.empty_like(a)
        out[0] = a @ b
        out[1:] = a[0] * b[1:] + b[0] * a[1:]
        return out

    def prod_inv_lam(self, d):
        lam = self.lam
        det = lam[0] ** 2 - lam[1:] @ lam[1:]
        out = np.empty_like(d)
        out[0] = (lam[0] * d[0] - lam[1:] @ d[1:]) / det
        out[1:] = (d[1:] - out[0] * lam[1:]) / lam[0]
        return out

    def lam_sq(self):
        return self.prod(self.lam, self.lam)

    def identity(self):
        e = np.zeros(self.lam.shape[0])
        e[0] = 1.0
        return e

    def mu_contrib(self):
        return float(self.lam @ self.lam)

    def step_to_boundary(self, dlam: np.ndarray) -> float:
        lam = self.lam
        # largest a with lam + a*dlam in the cone: quadratic in a
        c2 = dlam[0] ** 2 - dlam[1:] @ dlam[1:]
        c1 = lam[0] * dlam[0] - lam[1:] @ dlam[1:]
        c0 = lam[0] ** 2 - lam[1:] @ lam[1:]
        roots = []
        if abs(c2) > 1e-300:
            disc = c1 * c1 - c2 * c0
            if disc >= 0.0:
                sq = np.sqrt(disc)
                roots += [(-c1 - sq) / c2, (-c1 + sq) / c2]
        elif abs(c1) > 1e-300:
            roots.append(-c0 / (2.0 * c1))
        if dlam[0] < 0.0:
            roots.append(-lam[0] / dlam[0])
        pos = [r for r in roots if r > 0.0]
        return float(min(pos)) if pos else np.inf


class _PsdBlock:
    kind = "psd"

    def __init__(self, d: int, is_complex: bool) -> None:
        self.d = d
        self.is_complex = is_complex
        self.sdim = svec_dim(d, is_complex)
        self.degree = d

    def identity(self) -> np.ndarray:
        return svec(np.eye(self.d, dtype=np.complex128 if self.is_complex else np.float64), self.is_complex)

    def interior_margin(self, x: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(smat(x, self.d, self.is_complex)).min())

    def scale(self, x: np.ndarray, z: np.ndarray) -> "_PsdScaling":
        X = smat(x, self.d, self.is_complex)
        Z = smat(z, self.d, self.is_complex)
        try:
            Lx = np.linalg.cholesky(X)
            Lz = np.linalg.cholesky(Z)
        except np.linalg.LinAlgError as exc:
            raise ScalingError("PSD iterate lost definiteness") from exc
        U, s, Vh = np.linalg.svd(Lz.conj().T @ Lx)
        if s.min() <= 0.0:
            raise ScalingError("degenerate NT scaling")
        sq = np.sqrt(s)
        R = Lx @ Vh.conj().T / sq
        Rinv = (U.conj().T @ Lz.conj().T) / sq[:, None]
        return _PsdScaling(self, R, Rinv, s)


class _PsdScaling:
    def __init__(self, blk: _PsdBlock, R, Rinv, s) -> None:
        self.blk = blk
        self.R = R
        self.Rinv = Rinv
        self.s = s  # scaled point spectrum; lam = svec(diag(s))
        self.T = R @ R.conj().T
        d = blk.d
        lam = np.zeros(blk.sdim)
        lam[:d] = s
        self.lam = lam

    def _mat(self, v):
        return smat(v, self.blk.d, self.blk.is_complex)

    def _vec(self, M):
        return svec(M, self.blk.is_complex)

    def W(self, v):
        R = self.R
        return self._vec(R.conj().T @ self._mat(v) @ R)

    def WT(self, v):
        R = self.R
        return self._vec(R @ self._mat(v) @ R.conj().T)

    def WinvT(self, v):
        Ri = self.Rinv
        return self._vec(Ri @ self._mat(v) @ Ri.conj().T)

    def H(self, v):
        T = self.T
        return self._vec(T @ self._mat(v) @ T)

    def prod(self, a, b):
        A, B = self._mat(a), self._mat(b)
        return self._vec(0.5 * (A @ B + B @ A))

    def prod_inv_lam(self, d):
        # solve (Lam M + M Lam)/2 = D entrywise in the scaled eigenbasis
        D = self._mat(d)
        s = self.s
        return self._vec(2.0 * D / (s[:, None] + s[None, :]))

    def lam_sq(self):
        out = np.zeros(self.blk.sdim)
        out[: self.blk.d] = self.s**2
        return out

    def identity(self):
        return self.blk.identity()

    def mu_contrib(self):
        return float(self.s @ self.s)

    def step_to_boundary(self, dlam: np.ndarray) -> float:
        D = self._mat(dlam)
        rs = 1.0 / np.sqrt(self.s)
        M = rs[:, None] * D * rs[None, :]
        emin = np.linalg.eigvalsh(M).min()
        if emin >= 0.0:
            return np.inf
        return float(-1.0 / emin)


class ConeLayout:
    """Ordered cone blocks with offsets into the flat iterate vector."""

    def __init__(self, blocks: list[tuple]) -> None:
        self.blocks = []
        for spec in blocks:
            if spec[0] == "lp":
                blk = _LpBlock(spec[1])
            elif spec[0] == "soc":
                blk = _SocBlock(spec[1])
            elif spec[0] == "psd":
                blk = _PsdBlock(spec[1], spec[2])
            else:
                raise ValueError(f"unknown cone kind {spec[0]!r}")
            self.blocks.append(blk)
        self.offsets = np.cumsum([0] + [b.sdim for b in self.blocks])
        self.dim = int(self.offsets[-1])
        self.degree = sum(b.degree for b in self.blocks)

    def slices(self):
        return [slice(int(a), int(b)) for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def identity(self) -> np.ndarray:
        out = np.empty(self.dim)
        for blk, sl in zip(self.blocks, self.slices()):
            out[sl] = blk.identity()
        return out

    def interior_margin(self, x: np.ndarray) -> float:
        m = np.inf
        for blk, sl in zip(self.blocks, self.slices()):
            m = min(m, blk.interior_margin(x[sl]))
        return m

    def scale(self, x: np.ndarray, z: np.ndarray) -> "LayoutScaling":
        return LayoutScaling(self, x, z)


class LayoutScaling:
    """NT scaling of a full iterate, block by block."""

    def __init__(self, layout: ConeLayout, x: np.ndarray, z: np.ndarray) -> None:
        self.layout = layout
        self._sl = layout.slices()
        self.parts = [blk.scale(x[sl], z[sl]) for blk, sl in zip(layout.blocks, self._sl)]
        self.lam = np.concatenate([p.lam for p in self.parts]) if self.parts else np.zeros(0)

    def _apply(self, name: str, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for p, sl in zip(self.parts, self._sl):
            out[sl] = getattr(p, name)(v[sl])
        return out

    def W(self, v):
        return self._apply("W", v)

    def WT(self, v):
        return self._apply("WT", v)

    def WinvT(self, v):
        return self._apply("WinvT", v)

    def H(self, v):
        return self._apply("H", v)

    def prod(self, a, b):
        out = np.empty_like(a)
        for p, sl in zip(self.parts, self._sl):
            out[sl] = p.prod(a[sl], b[sl])
        return out

    def prod_inv_lam(self, d):
        return self._apply("prod_inv_lam", d)

    def lam_sq(self):
        return np.concatenate([p.lam_sq() for p in self.parts]) if self.parts else np.zeros(0)

    def identity(self):
        return self.layout.identity()

    def step_to_boundary(self, dlam: np.ndarray) -> float:
        a = np.inf
        for p, sl in zip(self.parts, self._sl):
            a = min(a, p.step_to_boundary(dlam[sl]))
        return a
