"""Embedded symmetric-cone interior-point solver (LP + SOC + PSD blocks)."""

from .problem import (
    AffineForm,
    ConicProblem,
    ConicSolution,
    RsocTriple,
    as_form,
    hyperbolic_constraint,
    solve,
)
from .textio import dump, load

__all__ = [
    "AffineForm",
    "ConicProblem",
    "ConicSolution",
    "RsocTriple",
    "as_form",
    "hyperbolic_constraint",
    "solve",
    "dump",
    "load",
]
