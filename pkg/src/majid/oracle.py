"""Brute-force game solver over explicit coloring sets.

Kept deliberately independent of the pattern machinery: states are sets of
green-ball bitmasks, moves are ball pairs, and an answer keeps exactly the
colorings that agree on the compared pair. Used to validate the pattern
solver on small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .core import Mode, Problem, ceil_log2
from .solver import SearchLimits, solve_exact

DEFAULT_CAP = 8


class OracleCapError(Exception):
    """Instance larger than the configured small-instance cap."""


def initial_coloring_set(problem: Problem) -> frozenset[int]:
    """All admissible green-ball masks for the instance."""
    n, p = problem.n, problem.p
    masks = []
    sizes = [p] if problem.mode is Mode.EXACTLY_P else range(p + 1)
    for k in sizes:
        for combo in itertools.combinations(range(n), k):
            m = 0
            for i in combo:
                m |= 1 << i
            masks.append(m)
    return frozenset(masks)


def _swap_stable(masks: frozenset[int], i: int, j: int) -> bool:
    """True when exchanging balls i and j maps the coloring set to itself."""
    bi, bj = 1 << i, 1 << j
    both = bi | bj
    for m in masks:
        x = m & both
        if x == bi or x == bj:
            if (m ^ both) not in masks:
                return False
    return True


def _ball_classes(masks: frozenset[int], n: int) -> list[list[int]]:
    """Partition balls into interchangeability classes.

    Swap-stability is transitive here, so checking each ball against one
    representative per existing class is enough."""
    classes: list[list[int]] = []
    for i in range(n):
        for cls in classes:
            if _swap_stable(masks, cls[0], i):
                cls.append(i)
                break
        else:
            classes.append([i])
    return classes


def solve_coloring_set(n: int, masks: frozenset[int], memo: dict | None = None) -> int:
    """Exact minimax comparisons needed to shrink the set to one coloring."""
    if memo is None:
        memo = {}

    def value(state: frozenset[int]) -> int:
        if len(state) == 1:
            return 0
        cached = memo.get(state)
        if cached is not None:
            return cached
        lb = ceil_log2(len(state))
        classes = _ball_classes(state, n)
        reps = [cls[0] for cls in classes]
        pairs = []
        for a in range(len(classes)):
            if len(classes[a]) >= 2:
                pairs.append((classes[a][0], classes[a][1]))
            for b in range(a + 1, len(classes)):
                pairs.append((reps[a], reps[b]))
        best = None
        for i, j in pairs:
            bi, bj = 1 << i, 1 << j
            same = frozenset(m for m in state if bool(m & bi) == bool(m & bj))
            diff = state - same
            children = sorted(
                (c for c in (same, diff) if c), key=len, reverse=True
            )
            val = 0
            for child in children:
                v = 1 + value(child)
                if best is not None and v >= best:
                    val = -1
                    break
                if v > val:
                    val = v
            if val >= 0 and (best is None or val < best):
                best = val
                if best == lb:
                    break
        assert best is not None
        memo[state] = best
        return best

    return value(masks)


def solve_by_colorings(problem: Problem, cap: int = DEFAULT_CAP) -> int:
    """Exact game value computed purely over explicit coloring sets."""
    if problem.n > cap:
        raise OracleCapError(f"n={problem.n} exceeds the oracle cap {cap}")
    return solve_coloring_set(problem.n, initial_coloring_set(problem))


@dataclass
class CrossCheckReport:
    """Agreement record between the coloring-set and pattern solvers."""

    instances: int = 0
    mismatches: list[tuple[Problem, int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def cross_check(max_n: int, cap: int = DEFAULT_CAP) -> CrossCheckReport:
    """Compare both solvers on every (n <= max_n, p, mode) instance."""
    if max_n > cap:
        raise OracleCapError(f"max_n={max_n} exceeds the oracle cap {cap}")
    report = CrossCheckReport()
    for n in range(1, max_n + 1):
        for p in range((n - 1) // 2 + 1):
            for mode in (Mode.EXACTLY_P, Mode.AT_MOST_P):
                problem = Problem(n, p, mode)
                brute = solve_by_colorings(problem, cap=cap)
                exact = solve_exact(problem, SearchLimits()).q
                report.instances += 1
                if brute != exact:
                    report.mismatches.append((problem, brute, exact))
    return report
