"""Pattern state, compatible-coloring counts, and closed-form bounds for the
red/green ball identification games."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

# A box keeps balls of one color per side; only the side sizes matter.
Shape = tuple[int, int]
Pattern = tuple[Shape, ...]


class Mode(Enum):
    """Constraint on the number of green balls: exactly p or at most p."""

    EXACTLY_P = "eq"
    AT_MOST_P = "le"


@dataclass(frozen=True)
class Problem:
    """One identification instance: n balls, green bound p, counting mode.

    Green balls are always a strict minority, so 2*p < n is required.
    """

    n: int
    p: int
    mode: Mode

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one ball")
        if self.p < 0:
            raise ValueError("green bound must be non-negative")
        if 2 * self.p >= self.n:
            raise ValueError(f"need 2*p < n, got n={self.n} p={self.p}")


@dataclass(frozen=True)
class BoundsReport:
    """Closed-form lower/upper bounds on the game value of one instance."""

    lower: int
    upper: int
    q_plus: int
    q_minus: int


def box_shape(small: int, big: int) -> Shape:
    """Validated (small, big) box shape: small <= big and at least one ball."""
    if small < 0 or big < 0:
        raise ValueError("side cardinalities must be non-negative")
    if small > big:
        raise ValueError(f"small side exceeds big side: ({small}, {big})")
    if small + big == 0:
        raise ValueError("empty box (0, 0) is not allowed")
    return (small, big)


def canonicalize(shapes: Iterable[tuple[int, int]]) -> Pattern:
    """Sort shapes into canonical order; permutations map to one value."""
    out = sorted(box_shape(s, b) for s, b in shapes)
    if not out:
        raise ValueError("a pattern needs at least one box")
    return tuple(out)


def initial_pattern(n: int) -> Pattern:
    """n singleton boxes, one ball each."""
    if n < 1:
        raise ValueError("need at least one ball")
    return ((0, 1),) * n


def total(pattern: Pattern) -> int:
    """Number of balls covered by the pattern."""
    return sum(s + b for s, b in pattern)


def merge_outcomes(pattern: Pattern, i: int, j: int) -> tuple[Pattern, Pattern]:
    """Both results of comparing boxes i and j: (aligned, crossed).

    Aligned joins small sides with small sides; crossed joins each small side
    with the other big side, normalised back to small <= big. Totals are
    preserved and both outputs are canonical. The outcomes may coincide as
    patterns, in which case the move has a single child.
    """
    k = len(pattern)
    if not (0 <= i < k and 0 <= j < k):
        raise IndexError(f"box index out of range: {i}, {j}")
    if i == j:
        raise ValueError("cannot merge a box with itself")
    (a, b), (c, d) = pattern[i], pattern[j]
    aligned = (a + c, b + d)
    x, y = a + d, b + c
    crossed = (min(x, y), max(x, y))
    rest = [pattern[t] for t in range(k) if t != i and t != j]
    return tuple(sorted(rest + [aligned])), tuple(sorted(rest + [crossed]))


def coloring_profile(pattern: Pattern, cap: int) -> list[int]:
    """ways[g] = number of ordered side choices with green total g, g <= cap.

    Every box contributes an independent two-way choice of which of its sides
    is the green one, so a balanced box counts twice for the same total.
    Choices whose running total exceeds cap are discarded.
    """
    ways = [0] * (cap + 1)
    ways[0] = 1
    for u, v in pattern:
        nxt = [0] * (cap + 1)
        for g, w in enumerate(ways):
            if w:
                if g + u <= cap:
                    nxt[g + u] += w
                if g + v <= cap:
                    nxt[g + v] += w
        ways = nxt
    return ways


def count_colorings(pattern: Pattern, p: int, mode: Mode) -> int:
    """Number of compatible colorings with exactly p (or at most p) greens."""
    prof = coloring_profile(pattern, p)
    if mode is Mode.EXACTLY_P:
        return prof[p]
    return sum(prof)


def binary_ones(n: int) -> int:
    """Number of ones in the binary representation of n >= 1."""
    if n < 1:
        raise ValueError("defined for positive integers")
    return n.bit_count()


def ceil_log2(x: int) -> int:
    """Smallest k with 2**k >= x, for x >= 1."""
    if x < 1:
        raise ValueError("defined for positive integers")
    return (x - 1).bit_length()


def bounds_le(n: int, p: int) -> BoundsReport:
    """Sandwich bounds for the at-most-p game; the gap is at most one.

    When n mod (p+1) equals p or is at most floor(p/2) the value is pinned to
    the upper formula, and the reported lower bound is raised to match.
    """
    Problem(n, p, Mode.AT_MOST_P)
    q_plus = n + 1 - (n + 1) // (p + 1)
    lower = n - n // (p + 1)
    r = n % (p + 1)
    if r == p or r <= p // 2:
        lower = q_plus
    return BoundsReport(lower, q_plus, q_plus, q_plus - 1)


def bounds_eq(n: int, p: int) -> BoundsReport:
    """Bounds for the exactly-p game.

    The upper bound is the podium construction with the best power-of-two
    height m. The lower bound takes the larger of the counting bound
    ceil(log2 C(n, p)) and the chain that repeatedly peels one mixed pair,
    two comparisons per peeled green.
    """
    Problem(n, p, Mode.EXACTLY_P)
    if p == 0:
        return BoundsReport(0, 0, 0, -1)
    m = min(n - 2 * p, 2 * p).bit_length() - 1
    q_plus = n + 1 - m - (n + 2 - (1 << m)) // (p + 1)
    lower = 0
    for j in range(1, p + 1):
        nj = n - 2 * (p - j)
        lower = max(ceil_log2(math.comb(nj, j)), 2 + lower)
    return BoundsReport(lower, q_plus, q_plus, q_plus - 1)


def type_string(pattern: Pattern) -> str:
    """Multiplicative rendering, largest shapes first, e.g. "(1,5)^1(0,4)^2"."""
    parts = []
    for shape, run in itertools.groupby(sorted(pattern, reverse=True)):
        parts.append(f"({shape[0]},{shape[1]})^{sum(1 for _ in run)}")
    return "".join(parts)
