"""Per-slot solvers: alternating conic blocks plus protocol drivers."""

from .lift import (
    LocalPoint,
    SubproblemError,
    lower_bound_rate,
    normalized_cascades,
    rank_ratio,
    star_from_dvecs,
    true_objective,
)
from .active import active_step
from .passive import PassiveResult, SrocrState, passive_step_es, solve_passive
from .starts import initial_solution, initial_star, matched_filters
from .es import all_orders, bcd_es, es_multistart, order_search
from .ms import binary_penalty, binary_violation, ms_penalty
from .ts import cophase_gain, ts_solve
from .baselines import conv_ris, oma, ues
from .quantize import quantize_star

__all__ = [
    "LocalPoint",
    "SubproblemError",
    "lower_bound_rate",
    "normalized_cascades",
    "rank_ratio",
    "star_from_dvecs",
    "true_objective",
    "active_step",
    "PassiveResult",
    "SrocrState",
    "passive_step_es",
    "solve_passive",
    "initial_solution",
    "initial_star",
    "matched_filters",
    "bcd_es",
    "es_multistart",
    "all_orders",
    "order_search",
    "ms_penalty",
    "binary_penalty",
    "binary_violation",
    "ts_solve",
    "cophase_gain",
    "conv_ris",
    "ues",
    "oma",
    "quantize_star",
]
