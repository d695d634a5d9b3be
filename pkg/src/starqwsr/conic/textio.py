"""Plain-text dump/load of conic problems, for debugging failed solves.

Format (one record per line, whitespace-separated tokens):

    conicdump 1
    scalar <name> <lb|-inf> <ub|inf>
    block <name> <dim> <hermitian|real>
    objective <min|max>
    form <const> [ ; s <name> <coef> ]* [ ; m <name> <entries> ]*
    constraint <name> <==|<=|>=> <rhs>
    form ...
    rsoc <name> <len(z)>
    form ...          (u, then v, then each z component)
    end

Block coefficient entries are row-major over the full dim x dim matrix;
Hermitian blocks store re/im pairs, real blocks one number per entry.
Floats are written with repr and round-trip exactly.
"""

from __future__ import annotations

import numpy as np

from .problem import AffineForm, ConicProblem


def _fmt_form(form: AffineForm, blocks: dict) -> str:
    parts = [f"form {float(form.const)!r}"]
    for k in sorted(form.lin):
        parts.append(f"; s {k} {float(form.lin[k])!r}")
    for k in sorted(form.mats):
        dim, herm = blocks[k]
        C = np.asarray(form.mats[k]).reshape(-1)
        if herm:
            ent = " ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in C)
        else:
            ent = " ".join(f"{float(v)!r}" for v in C)
        parts.append(f"; m {k} {ent}")
    return " ".join(parts)


def _parse_form(line: str, blocks: dict) -> AffineForm:
    chunks = [c.strip() for c in line.split(";")]
    head = chunks[0].split()
    if head[0] != "form":
        raise ValueError(f"expected form record, got {line[:40]!r}")
    form = AffineForm(float(head[1]))
    for ch in chunks[1:]:
        tok = ch.split()
        if tok[0] == "s":
            form.add_scalar(tok[1], float(tok[2]))
        elif tok[0] == "m":
            name = tok[1]
            dim, herm = blocks[name]
            vals = np.array([float(t) for t in tok[2:]])
            if herm:
                C = (vals[0::2] + 1j * vals[1::2]).reshape(dim, dim)
            else:
                C = vals.reshape(dim, dim)
            form.add_block(name, C)
        else:
            raise ValueError(f"bad form chunk {ch[:40]!r}")
    return form


def dump(problem: ConicProblem, path) -> None:
    """Write ``problem`` to ``path`` in the documented text format."""
    with open(path, "w") as f:
        f.write("conicdump 1\n")
        for nm, (lb, ub) in problem.scalars.items():
            lo = "-inf" if lb is None else repr(float(lb))
            hi = "inf" if ub is None else repr(float(ub))
            f.write(f"scalar {nm} {lo} {hi}\n")
        for nm, (dim, herm) in problem.blocks.items():
            f.write(f"block {nm} {dim} {'hermitian' if herm else 'real'}\n")
        f.write(f"objective {problem.objective_sense}\n")
        f.write(_fmt_form(problem.objective_form, problem.blocks) + "\n")
        for nm, form, sense, rhs in problem.constraints:
            f.write(f"constraint {nm} {sense} {rhs!r}\n")
            f.write(_fmt_form(form, problem.blocks) + "\n")
        for nm, trip in problem.rsocs:
            f.write(f"rsoc {nm} {len(trip.z)}\n")
            f.write(_fmt_form(trip.u, problem.blocks) + "\n")
            f.write(_fmt_form(trip.v, problem.blocks) + "\n")
            for zf in trip.z:
                f.write(_fmt_form(zf, problem.blocks) + "\n")
        f.write("end\n")


def load(path) -> ConicProblem:
    """Read a problem previously written by :func:`dump`."""
    prob = ConicProblem()
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines or lines[0].split() != ["conicdump", "1"]:
        raise ValueError("not a conicdump v1 file")
    i = 1
    while i < len(lines):
        tok = lines[i].split()
        kind = tok[0]
        if kind == "scalar":
            lb = None if tok[2] == "-inf" else float(tok[2])
            ub = None if tok[3] == "inf" else float(tok[3])
            prob.add_scalar(tok[1], lb, ub)
            i += 1
        elif kind == "block":
            prob.add_psd_block(tok[1], int(tok[2]), tok[3] == "hermitian")
            i += 1
        elif kind == "objective":
            form = _parse_form(lines[i + 1], prob.blocks)
            prob.set_objective(tok[1], form)
            i += 2
        elif kind == "constraint":
            form = _parse_form(lines[i + 1], prob.blocks)
            prob.add_constraint(form, tok[2], float(tok[3]), name=tok[1])
            i += 2
        elif kind == "rsoc":
            nz = int(tok[2])
            u = _parse_form(lines[i + 1], prob.blocks)
            v = _parse_form(lines[i + 2], prob.blocks)
            z = [_parse_form(lines[i + 3 + j], prob.blocks) for j in range(nz)]
            prob.add_rsoc(u, v, z, name=tok[1])
            i += 3 + nz
        elif kind == "end":
            break
        else:
            raise ValueError(f"unknown record {kind!r} at line {i + 1}")
    return prob
