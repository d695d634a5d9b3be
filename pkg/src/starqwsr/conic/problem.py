"""Structured conic problems: scalars, PSD blocks, trace-linear constraints.

A :class:`ConicProblem` carries named scalar variables (with optional
bounds), named PSD matrix blocks, a linear objective, trace-linear
equality/inequality constraints, and rotated second-order-cone triples
(u, v, z) enforcing

    2 u v >= ||z||^2,   u >= 0, v >= 0,

where u, v, z are affine in the declared variables.  ``compile`` lowers
everything to the standard form consumed by :mod:`.ipm` and keeps the
maps needed to recover named values and multipliers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import ipm
from .cones import smat, svec

_SQRT2 = np.sqrt(2.0)

SENSE_EQ = "=="
SENSE_LE = "<="
SENSE_GE = ">="
_SENSES = {SENSE_EQ, SENSE_LE, SENSE_GE, "="}


class AffineForm:
    """Scalar-valued affine expression: const + sum a_i s_i + sum Tr(C_b X_b)."""

    __slots__ = ("const", "lin", "mats")

    def __init__(self, const: float = 0.0) -> None:
        self.const = float(const)
        self.lin: dict[str, float] = {}
        self.mats: dict[str, np.ndarray] = {}

    def add_scalar(self, name: str, coef: float = 1.0) -> "AffineForm":
        self.lin[name] = self.lin.get(name, 0.0) + float(coef)
        return self

    def add_block(self, name: str, coeff: np.ndarray) -> "AffineForm":
        coeff = np.asarray(coeff)
        if name in self.mats:
            self.mats[name] = self.mats[name] + coeff
        else:
            self.mats[name] = coeff.copy()
        return self

    def plus(self, other: "AffineForm", weight: float = 1.0) -> "AffineForm":
        self.const += weight * other.const
        for k, v in other.lin.items():
            self.add_scalar(k, weight * v)
        for k, m in other.mats.items():
            self.add_block(k, weight * m)
        return self

    def times(self, s: float) -> "AffineForm":
        self.const *= s
        for k in self.lin:
            self.lin[k] *= s
        for k in self.mats:
            self.mats[k] = self.mats[k] * s
        return self

    def copy(self) -> "AffineForm":
        out = AffineForm(self.const)
        out.lin = dict(self.lin)
        out.mats = {k: v.copy() for k, v in self.mats.items()}
        return out

    def evaluate(self, scalars: dict | None = None, blocks: dict | None = None) -> float:
        val = self.const
        for k, a in self.lin.items():
            val += a * (scalars or {})[k]
        for k, C in self.mats.items():
            val += float(np.trace(C @ (blocks or {})[k]).real)
        return val


def as_form(obj) -> AffineForm:
    """Coerce a scalar-variable name, number, or form into an AffineForm."""
    if isinstance(obj, AffineForm):
        return obj
    if isinstance(obj, str):
        return AffineForm().add_scalar(obj)
    return AffineForm(float(obj))


class RsocTriple(NamedTuple):
    """Rotated-SOC data (u, v, z): feasible iff 2 u v >= ||z||^2, u, v >= 0."""

    u: AffineForm
    v: AffineForm
    z: tuple

    def margin(self, scalars: dict | None = None, blocks: dict | None = None) -> float:
        """2uv - ||z||^2 at a candidate point; >= 0 (with u,v >= 0) iff feasible."""
        uv = self.u.evaluate(scalars, blocks), self.v.evaluate(scalars, blocks)
        zz = sum(f.evaluate(scalars, blocks) ** 2 for f in self.z)
        return 2.0 * uv[0] * uv[1] - zz


def hyperbolic_constraint(s_var, trace_form) -> RsocTriple:
    """Encode S * Tr >= 1 as the rotated-SOC triple (S, Tr, [sqrt(2)]).

    With z fixed to the constant sqrt(2), membership 2*S*Tr >= ||z||^2 = 2
    is exactly S*Tr >= 1; this is how reciprocal slacks 1/S <= Tr(...)
    enter the lifted subproblems.
    """
    return RsocTriple(as_form(s_var), as_form(trace_form), (AffineForm(_SQRT2),))


@dataclass
class ConicSolution:
    """Result of :func:`solve` with values recovered per variable name.

    ``objective`` is reported in the user's sense.  ``dual_objective`` is
    the complementarity-certified bound: primal value minus the measured
    conic gap (x'z + tau*kappa)/tau^2, so for minimization it never
    exceeds ``objective``; the raw multiplier value b'y/tau sits in
    ``diagnostics["dual_objective_multipliers"]``.  ``residuals`` holds
    relative primal/dual feasibility and the relative gap; on optimal
    exits all three are at or below the requested tolerance.  Inequality
    multipliers in ``duals`` are oriented for the minimization form and
    are nonnegative.
    """

    status: str
    objective: float
    dual_objective: float
    scalars: dict[str, float] = field(default_factory=dict)
    blocks: dict[str, np.ndarray] = field(default_factory=dict)
    duals: dict[str, float] = field(default_factory=dict)
    residuals: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)


class ConicProblem:
    """Linear objective over scalars and PSD blocks with conic constraints."""

    def __init__(self) -> None:
        self.scalars: dict[str, tuple] = {}
        self.blocks: dict[str, tuple] = {}
        self.constraints: list[tuple] = []  # (name, form, sense, rhs)
        self.rsocs: list[tuple] = []  # (name, RsocTriple)
        self.objective_sense = "min"
        self.objective_form = AffineForm()
        self._auto = 0

    # -- declarations -------------------------------------------------
    def add_scalar(self, name: str, lb: float | None = None, ub: float | None = None) -> str:
        if name in self.scalars or name in self.blocks:
            raise ValueError(f"variable {name!r} already declared")
        if lb is not None and ub is not None and lb > ub:
            raise ValueError(f"empty bound interval for {name!r}")
        self.scalars[name] = (lb, ub)
        return name

    def add_psd_block(self, name: str, dim: int, hermitian: bool = True) -> str:
        if name in self.scalars or name in self.blocks:
            raise ValueError(f"variable {name!r} already declared")
        if dim < 1:
            raise ValueError("PSD block dimension must be positive")
        self.blocks[name] = (int(dim), bool(hermitian))
        return name

    # -- ingestion ----------------------------------------------------
    def _check_form(self, form: AffineForm) -> AffineForm:
        """Validate names/dims and symmetrize block coefficients in place."""
        for k in form.lin:
            if k not in self.scalars:
                raise KeyError(f"unknown scalar variable {k!r}")
        for k, C in form.mats.items():
            if k not in self.blocks:
                raise KeyError(f"unknown PSD block {k!r}")
            dim, herm = self.blocks[k]
            C = np.asarray(C, dtype=np.complex128 if herm else np.float64)
            if C.shape != (dim, dim):
                raise ValueError(f"coefficient for block {k!r} has shape {C.shape}, expected {(dim, dim)}")
            asym = np.abs(C - C.conj().T).max()
            if asym > 1e-8 * max(1.0, np.abs(C).max()):
                warnings.warn(
                    f"coefficient for block {k!r} asymmetric by {asym:.2e}; symmetrizing",
                    RuntimeWarning,
                    stacklevel=3,
                )
            form.mats[k] = 0.5 * (C + C.conj().T)
        return form

    def _name(self, prefix: str, given: str | None) -> str:
        if given is not None:
            return given
        self._auto += 1
        return f"{prefix}{self._auto}"

    def set_objective(self, sense: str, form: AffineForm) -> None:
        if sense not in ("min", "max"):
            raise ValueError("objective sense must be 'min' or 'max'")
        self.objective_sense = sense
        self.objective_form = self._check_form(as_form(form).copy())

    def add_constraint(self, form: AffineForm, sense: str, rhs: float = 0.0, name: str | None = None) -> str:
        if sense not in _SENSES:
            raise ValueError(f"sense must be one of ==, <=, >= (got {sense!r})")
        sense = SENSE_EQ if sense == "=" else sense
        name = self._name("c", name)
        self.constraints.append((name, self._check_form(as_form(form).copy()), sense, float(rhs)))
        return name

    def add_rsoc(self, u, v, z, name: str | None = None) -> str:
        u = self._check_form(as_form(u).copy())
        v = self._check_form(as_form(v).copy())
        zt = tuple(self._check_form(as_form(f).copy()) for f in z)
        name = self._name("q", name)
        self.rsocs.append((name, RsocTriple(u, v, zt)))
        return name

    def add_hyperbolic(self, s_var, trace_form, name: str | None = None) -> str:
        t = hyperbolic_constraint(s_var, self._check_form(as_form(trace_form).copy()))
        return self.add_rsoc(t.u, t.v, t.z, name=name)

    # -- lowering -----------------------------------------------------
    def compile(self) -> "_Compiled":
        return _Compiled(self)


class _Compiled:
    """Standard-form data (c, A, b, cones) plus recovery maps."""

    def __init__(self, prob: ConicProblem) -> None:
        self.prob = prob
        # scalar representations inside the LP segment
        self.rep: dict[str, tuple] = {}
        col = 0
        range_rows = []  # (slack_col, extra_col, width)
        for nm, (lb, ub) in prob.scalars.items():
            if lb is not None and ub is not None and lb == ub:
                self.rep[nm] = ("fixed", lb)
            elif lb is not None and ub is None:
                self.rep[nm] = ("lo", col, lb)
                col += 1
            elif ub is not None and lb is None:
                self.rep[nm] = ("hi", col, ub)
                col += 1
            elif lb is None and ub is None:
                self.rep[nm] = ("free", col, col + 1)
                col += 2
            else:
                self.rep[nm] = ("lo", col, lb)
                range_rows.append((col, col + 1, ub - lb))
                col += 2
        self.n_scalar_cols = col

        n_slack = sum(1 for _, _, sense, _ in prob.constraints if sense != SENSE_EQ)
        self.slack0 = col
        n_lp = col + n_slack

        cones: list[tuple] = []
        if n_lp:
            cones.append(("lp", n_lp))
        off = n_lp
        self.soc_offsets = {}
        for nm, trip in prob.rsocs:
            d = 2 + len(trip.z)
            self.soc_offsets[nm] = (off, d)
            cones.append(("soc", d))
            off += d
        self.block_offsets = {}
        for nm, (dim, herm) in prob.blocks.items():
            w = dim * dim if herm else dim * (dim + 1) // 2
            self.block_offsets[nm] = (off, dim, herm)
            cones.append(("psd", dim, herm))
            off += w
        self.n = off
        self.cones = cones

        rows: list[np.ndarray] = []
        rhs: list[float] = []
        self.row_of: dict[str, int] = {}

        def emit(form: AffineForm) -> tuple[np.ndarray, float]:
            row = np.zeros(self.n)
            const = form.const
            for k, a in form.lin.items():
                r = self.rep[k]
                if r[0] == "fixed":
                    const += a * r[1]
                elif r[0] == "lo":
                    row[r[1]] += a
                    const += a * r[2]
                elif r[0] == "hi":
                    row[r[1]] -= a
                    const += a * r[2]
                else:  # free split p - q
                    row[r[1]] += a
                    row[r[2]] -= a
            for k, C in form.mats.items():
                o, dim, herm = self.block_offsets[k]
                w = dim * dim if herm else dim * (dim + 1) // 2
                row[o : o + w] += svec(C, herm)
            return row, const

        self._emit = emit

        slack = self.slack0
        for nm, form, sense, r in prob.constraints:
            row, const = emit(form)
            if sense == SENSE_LE:
                row[slack] = 1.0
                slack += 1
            elif sense == SENSE_GE:
                row[slack] = -1.0
                slack += 1
            self.row_of[nm] = len(rows)
            rows.append(row)
            rhs.append(r - const)

        for scol, ecol, width in range_rows:
            row = np.zeros(self.n)
            row[scol] = 1.0
            row[ecol] = 1.0
            rows.append(row)
            rhs.append(width)

        for nm, trip in prob.rsocs:
            o, d = self.soc_offsets[nm]
            head_u, cu = emit(trip.u)
            head_v, cv = emit(trip.v)
            row = (head_u + head_v) / _SQRT2
            row[o] -= 1.0
            rows.append(row)
            rhs.append(-(cu + cv) / _SQRT2)
            row = (head_u - head_v) / _SQRT2
            row[o + 1] -= 1.0
            rows.append(row)
            rhs.append(-(cu - cv) / _SQRT2)
            for j, zf in enumerate(trip.z):
                rz, cz = emit(zf)
                rz = rz.copy()
                rz[o + 2 + j] -= 1.0
                rows.append(rz)
                rhs.append(-cz)

        self.A = np.array(rows) if rows else np.zeros((0, self.n))
        self.b = np.array(rhs)

        obj_row, obj_const = emit(prob.objective_form)
        self.sign = 1.0 if prob.objective_sense == "min" else -1.0
        self.c = self.sign * obj_row
        self.obj_const = obj_const

    def recover(self, raw: ipm.RawSolution, tolerance: float) -> ConicSolution:
        prob = self.prob
        diagnostics = {
            "tau": raw.tau,
            "kappa": raw.kappa,
            "mu": raw.mu,
        }
        if raw.status not in (ipm.STATUS_OPTIMAL, ipm.STATUS_NUMERICAL):
            return ConicSolution(
                status=raw.status,
                objective=np.nan,
                dual_objective=np.nan,
                residuals={"primal": raw.pres, "dual": raw.dres, "gap": raw.relgap},
                iterations=raw.iterations,
                diagnostics=diagnostics,
            )

        x = raw.x
        scalars = {}
        for nm, r in ((k, self.rep[k]) for k in prob.scalars):
            if r[0] == "fixed":
                scalars[nm] = float(r[1])
            elif r[0] == "lo":
                scalars[nm] = float(r[2] + x[r[1]])
            elif r[0] == "hi":
                scalars[nm] = float(r[2] - x[r[1]])
            else:
                scalars[nm] = float(x[r[1]] - x[r[2]])
        blocks = {}
        for nm, (o, dim, herm) in self.block_offsets.items():
            w = dim * dim if herm else dim * (dim + 1) // 2
            blocks[nm] = smat(x[o : o + w], dim, herm)

        duals = {}
        for nm, _, sense, _ in prob.constraints:
            yv = raw.y[self.row_of[nm]]
            duals[nm] = float(-yv if sense == SENSE_LE else yv)

        gap_abs = raw.relgap * max(1.0, abs(raw.pobj), abs(raw.dobj))
        pobj_user = self.sign * raw.pobj + self.obj_const
        dobj_user = self.sign * (raw.pobj - gap_abs) + self.obj_const
        diagnostics["dual_objective_multipliers"] = self.sign * raw.dobj + self.obj_const

        return ConicSolution(
            status=raw.status,
            objective=pobj_user,
            dual_objective=dobj_user,
            scalars=scalars,
            blocks=blocks,
            duals=duals,
            residuals={"primal": raw.pres, "dual": raw.dres, "gap": raw.relgap},
            iterations=raw.iterations,
            diagnostics=diagnostics,
        )


def solve(problem: ConicProblem, tolerance: float = 1e-7, max_iters: int = 200) -> ConicSolution:
    """Compile and solve a :class:`ConicProblem`.

    status "optimal" certifies primal/dual feasibility and relative gap at
    or below ``tolerance``; "infeasible"/"unbounded" carry Farkas
    certificates in the residual fields; anything the interior-point
    loop cannot certify within ``max_iters`` comes back as
    "numerical_failure" with the best residuals seen.
    """
    comp = problem.compile()
    raw = ipm.solve_standard(comp.c, comp.A, comp.b, comp.cones, tol=tolerance, max_iters=max_iters)
    return comp.recover(raw, tolerance)
