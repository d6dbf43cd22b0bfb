"""Exact solver and strategy laboratory for red/green ball identification games."""

from .core import (
    BoundsReport,
    Mode,
    Pattern,
    Problem,
    Shape,
    binary_ones,
    bounds_eq,
    bounds_le,
    canonicalize,
    count_colorings,
    initial_pattern,
    merge_outcomes,
    type_string,
)
from .solver import (
    MemoStore,
    SearchLimits,
    SolveReport,
    breaker_majority_outcome,
    evaluate_strategy,
    memo_load,
    memo_save,
    solve_exact,
    worst_case_of_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport",
    "Mode",
    "Pattern",
    "Problem",
    "Shape",
    "binary_ones",
    "bounds_eq",
    "bounds_le",
    "canonicalize",
    "count_colorings",
    "initial_pattern",
    "merge_outcomes",
    "type_string",
    "MemoStore",
    "SearchLimits",
    "SolveReport",
    "breaker_majority_outcome",
    "evaluate_strategy",
    "memo_load",
    "memo_save",
    "solve_exact",
    "worst_case_of_strategy",
]
