"""Exact game values by memoized branch and bound over canonical patterns,
plus adversarial drivers that evaluate deterministic Maker strategies.

Memo cache file layout (LEB128 unsigned varints):

    magic    5 bytes   b"MAJID"
    version  1 byte    format version, currently 1
    p        varint
    mode     1 byte    1 = exactly p, 2 = at most p
    tag      1 byte    counting semantics, 1 = ordered sides
    entries, repeated until EOF:
        k        varint                  number of shapes
        shapes   k * (varint, varint)    (small, big) pairs, canonical order
        value    varint                  exact remaining-comparison count
"""

from __future__ import annotations

import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Protocol

from .core import (
    BoundsReport,
    Mode,
    Pattern,
    Problem,
    bounds_eq,
    bounds_le,
    ceil_log2,
    coloring_profile,
    count_colorings,
    initial_pattern,
    merge_outcomes,
)

_MAGIC = b"MAJID"
FORMAT_VERSION = 1
SEMANTICS_ORDERED = 1
_MODE_BYTE = {Mode.EXACTLY_P: 1, Mode.AT_MOST_P: 2}
_BYTE_MODE = {v: k for k, v in _MODE_BYTE.items()}


class MemoError(Exception):
    """Cache file corruption or metadata mismatch."""


class MemoConsistencyError(MemoError):
    """An insert tried to change an already stored exact value."""


class UnsoundStrategyError(Exception):
    """A strategy declared completion while the coloring is not determined."""


class StrategyCostError(Exception):
    """A strategy used more than n - 1 comparisons."""


class _CapExceeded(Exception):
    pass


class _Fork(Exception):
    """Raised by the exhaustive Breaker when both answers stay feasible."""

    def __init__(self, script: list, x: int, y: int):
        self.script = script
        self.x = x
        self.y = y


@dataclass(frozen=True)
class SearchLimits:
    """Optional caps on one solve call; thread_count fans out root moves."""

    node_cap: int | None = None
    time_cap: float | None = None
    thread_count: int = 1

    def __post_init__(self) -> None:
        if self.node_cap is not None and self.node_cap < 1:
            raise ValueError("node_cap must be positive")
        if self.time_cap is not None and self.time_cap <= 0:
            raise ValueError("time_cap must be positive")
        if self.thread_count < 1:
            raise ValueError("thread_count must be positive")


@dataclass
class MemoStore:
    """Exact values keyed by canonical pattern, valid for one (p, mode)."""

    p: int
    mode: Mode
    values: dict[Pattern, int] = field(default_factory=dict)
    semantics: int = SEMANTICS_ORDERED
    version: int = FORMAT_VERSION

    def matches(self, problem: Problem) -> bool:
        return self.p == problem.p and self.mode is problem.mode

    def get(self, pattern: Pattern) -> int | None:
        return self.values.get(pattern)

    def put(self, pattern: Pattern, value: int) -> None:
        old = self.values.get(pattern)
        if old is not None and old != value:
            raise MemoConsistencyError(
                f"memo rewrite with a different value for {pattern}: {old} -> {value}"
            )
        self.values[pattern] = value

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SolveReport:
    """Result of one exact solve, with search statistics and bound checks."""

    q: int | None
    nodes: int
    memo_hits: int
    prunes: int
    elapsed: float
    bounds: BoundsReport
    lower_ok: bool
    upper_ok: bool
    conclusive: bool
    warm_entries: int


def _write_uv(buf: bytearray, x: int) -> None:
    while True:
        b = x & 0x7F
        x >>= 7
        buf.append(b | 0x80 if x else b)
        if not x:
            return


def _read_uv(data: bytes, pos: int) -> tuple[int, int]:
    out = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise MemoError("truncated varint")
        b = data[pos]
        pos += 1
        out |= (b & 0x7F) << shift
        if not b & 0x80:
            return out, pos
        shift += 7


def memo_save(memo: MemoStore, path) -> None:
    """Write the store in the versioned binary layout (see module docstring)."""
    buf = bytearray(_MAGIC)
    buf.append(memo.version)
    _write_uv(buf, memo.p)
    buf.append(_MODE_BYTE[memo.mode])
    buf.append(memo.semantics)
    for pattern, value in sorted(memo.values.items()):
        _write_uv(buf, len(pattern))
        for u, v in pattern:
            _write_uv(buf, u)
            _write_uv(buf, v)
        _write_uv(buf, value)
    Path(path).write_bytes(bytes(buf))


def memo_load(path, *, p: int | None = None, mode: Mode | None = None) -> MemoStore:
    """Read a store back; optional p/mode assert the expected metadata."""
    data = Path(path).read_bytes()
    if data[: len(_MAGIC)] != _MAGIC:
        raise MemoError("bad magic, not a memo cache file")
    pos = len(_MAGIC)
    if pos >= len(data):
        raise MemoError("truncated header")
    version = data[pos]
    pos += 1
    if version != FORMAT_VERSION:
        raise MemoError(f"unsupported format version {version}")
    hdr_p, pos = _read_uv(data, pos)
    if pos + 2 > len(data):
        raise MemoError("truncated header")
    mode_b = data[pos]
    tag = data[pos + 1]
    pos += 2
    if mode_b not in _BYTE_MODE:
        raise MemoError(f"unknown mode byte {mode_b}")
    if tag != SEMANTICS_ORDERED:
        raise MemoError(f"unknown counting semantics tag {tag}")
    hdr_mode = _BYTE_MODE[mode_b]
    if p is not None and p != hdr_p:
        raise MemoError(f"cache is for p={hdr_p}, expected p={p}")
    if mode is not None and mode is not hdr_mode:
        raise MemoError(f"cache is for mode={hdr_mode.value}, expected {mode.value}")
    store = MemoStore(hdr_p, hdr_mode, semantics=tag, version=version)
    while pos < len(data):
        k, pos = _read_uv(data, pos)
        shapes = []
        for _ in range(k):
            u, pos = _read_uv(data, pos)
            v, pos = _read_uv(data, pos)
            shapes.append((u, v))
        value, pos = _read_uv(data, pos)
        store.values[tuple(shapes)] = value
    return store


def _clip_pattern(pattern: Pattern, cap: int) -> Pattern:
    """Cap big sides at cap = p + 1; green sides larger than p never occur,
    so the game value is unchanged while states collapse together."""
    return tuple(sorted((u, v if v <= cap else cap) for u, v in pattern))


class _Search:
    """Depth-first exact evaluator over clipped canonical patterns."""

    __slots__ = (
        "p",
        "eq",
        "cap",
        "memo",
        "counts",
        "node_cap",
        "deadline",
        "skip_forced",
        "nodes",
        "hits",
        "prunes",
    )

    def __init__(
        self,
        problem: Problem,
        memo_values: dict,
        counts: dict,
        limits: SearchLimits,
        deadline: float | None,
        skip_forced: bool,
    ):
        self.p = problem.p
        self.eq = problem.mode is Mode.EXACTLY_P
        self.cap = problem.p + 1
        self.memo = memo_values
        self.counts = counts
        self.node_cap = limits.node_cap
        self.deadline = deadline
        self.skip_forced = skip_forced
        self.nodes = 0
        self.hits = 0
        self.prunes = 0

    def count(self, pattern: Pattern) -> int:
        c = self.counts.get(pattern)
        if c is None:
            prof = coloring_profile(pattern, self.p)
            c = prof[self.p] if self.eq else sum(prof)
            self.counts[pattern] = c
        return c

    def moves(self, pattern: Pattern, c_parent: int) -> list[tuple[int, tuple[Pattern, ...]]]:
        """Deduped moves as (lower bound, children) sorted cheapest first.

        Children are ordered by descending coloring count so the majority
        Breaker line is attacked first; zero-count children are dropped.
        """
        uniq: list[tuple[tuple[int, int], int]] = []
        prev = None
        for s in pattern:
            if s == prev:
                uniq[-1] = (s, uniq[-1][1] + 1)
            else:
                uniq.append((s, 1))
                prev = s
        cap = self.cap
        out = []
        forced = []
        for ai in range(len(uniq)):
            a, mult_a = uniq[ai]
            for bi in range(ai, len(uniq)):
                b, _ = uniq[bi]
                if ai == bi and mult_a < 2:
                    continue
                rest = []
                took_a = took_b = False
                for s in pattern:
                    if not took_a and s == a:
                        took_a = True
                        continue
                    if not took_b and s == b:
                        took_b = True
                        continue
                    rest.append(s)
                al = (a[0] + b[0], a[1] + b[1])
                al = (al[0], al[1] if al[1] <= cap else cap)
                x, y = a[0] + b[1], a[1] + b[0]
                cr = (x, y) if x <= y else (y, x)
                cr = (cr[0], cr[1] if cr[1] <= cap else cap)
                child_a = tuple(sorted(rest + [al]))
                ca = self.count(child_a)
                if al == cr:
                    if ca == 0:
                        continue
                    children = ((child_a, ca),)
                else:
                    child_c = tuple(sorted(rest + [cr]))
                    cc = c_parent - ca
                    if child_c not in self.counts:
                        self.counts[child_c] = cc
                    pair = [(ch, cnt) for ch, cnt in ((child_a, ca), (child_c, cc)) if cnt > 0]
                    if not pair:
                        continue
                    pair.sort(key=lambda t: -t[1])
                    children = tuple(pair)
                move = (1 + ceil_log2(children[0][1]), tuple(ch for ch, _ in children))
                if self.skip_forced and al != cr and len(children) == 1:
                    forced.append(move)
                else:
                    out.append(move)
        if not out:
            out = forced
        out.sort()
        return out

    def value(self, pattern: Pattern, ub0: int | None = None) -> int:
        """Exact minimax value of a clipped pattern with count >= 1.

        ub0, when given, must be a certified upper bound for this pattern
        (for example an exhaustively verified strategy worst case)."""
        memoized = self.memo.get(pattern)
        if memoized is not None:
            self.hits += 1
            return memoized
        c = self.count(pattern)
        if c == 1:
            return 0
        self.nodes += 1
        if self.node_cap is not None and self.nodes > self.node_cap:
            raise _CapExceeded
        if (
            self.deadline is not None
            and (self.nodes & 1023) == 0
            and time.perf_counter() > self.deadline
        ):
            raise _CapExceeded
        lb = ceil_log2(c)
        best = len(pattern) - 1  # chaining everything always finishes
        if ub0 is not None and ub0 < best:
            best = ub0
        if lb >= best:
            self.memo[pattern] = best
            return best
        for move_lb, children in self.moves(pattern, c):
            if move_lb >= best:
                self.prunes += 1
                break
            val = 0
            for child in children:
                v = 1 + self.value(child)
                if v >= best:
                    self.prunes += 1
                    val = -1
                    break
                if v > val:
                    val = v
            if 0 <= val < best:
                best = val
                if best == lb:
                    break
        self.memo[pattern] = best
        return best


def _solve_root_parallel(
    problem: Problem,
    root: Pattern,
    c_root: int,
    memo_values: dict,
    counts: dict,
    limits: SearchLimits,
    deadline: float | None,
    skip_forced: bool,
    upper_seed: int | None,
) -> tuple[int, list[_Search]]:
    """Fan out root moves over worker threads; exact values regardless of
    interleaving because workers only share write-once memo entries."""
    primary = _Search(problem, memo_values, counts, limits, deadline, skip_forced)
    move_list = primary.moves(root, c_root)
    best_box = {"best": len(root) - 1 if upper_seed is None else min(len(root) - 1, upper_seed)}
    lock = threading.Lock()
    searches = [primary]

    def eval_move(children: tuple[Pattern, ...]) -> int | None:
        s = _Search(problem, memo_values, counts, limits, deadline, skip_forced)
        with lock:
            searches.append(s)
        val = 0
        for child in children:
            with lock:
                cur = best_box["best"]
            v = 1 + s.value(child)
            if v >= cur:
                val = -1
                break
            if v > val:
                val = v
        if val >= 0:
            with lock:
                if val < best_box["best"]:
                    best_box["best"] = val
            return val
        return None

    with ThreadPoolExecutor(max_workers=limits.thread_count) as pool:
        futures = [pool.submit(eval_move, children) for _, children in move_list]
        for f in futures:
            f.result()
    return best_box["best"], searches


def solve_exact(
    problem: Problem,
    limits: SearchLimits | None = None,
    memo: MemoStore | None = None,
    *,
    skip_forced_moves: bool = False,
    upper_seed: int | None = None,
) -> SolveReport:
    """Exact Q value of the instance by memoized branch and bound.

    Pruning: memo lookups, the ceil(log2 count) lower bound at every node,
    and depth-first branch and bound seeded with the chain upper bound
    (number of boxes minus one) plus an optional certified upper_seed.
    Returns a report whose q is checked against the closed-form bounds; a
    violated bound marks the run as a contradiction for the caller to flag.
    On an exceeded cap the report comes back inconclusive with q = None.
    """
    limits = limits or SearchLimits()
    if memo is None:
        memo = MemoStore(problem.p, problem.mode)
    elif not memo.matches(problem):
        if len(memo):
            raise MemoError(
                f"memo store is for (p={memo.p}, mode={memo.mode.value}), "
                f"problem needs (p={problem.p}, mode={problem.mode.value})"
            )
        memo.p = problem.p
        memo.mode = problem.mode
    warm = len(memo)
    t0 = time.perf_counter()
    deadline = None if limits.time_cap is None else t0 + limits.time_cap
    root = _clip_pattern(initial_pattern(problem.n), problem.p + 1)
    counts: dict[Pattern, int] = {}
    search = _Search(problem, memo.values, counts, limits, deadline, skip_forced_moves)
    c_root = search.count(root)
    if c_root == 0:
        raise ValueError("no compatible coloring, infeasible instance")
    q: int | None
    all_searches = [search]
    try:
        if c_root == 1:
            q = 0
        elif limits.thread_count > 1:
            q, all_searches = _solve_root_parallel(
                problem, root, c_root, memo.values, counts, limits, deadline,
                skip_forced_moves, upper_seed,
            )
            memo.values[root] = q
        else:
            q = search.value(root, ub0=upper_seed)
        conclusive = True
    except _CapExceeded:
        q = None
        conclusive = False
    elapsed = time.perf_counter() - t0
    if problem.mode is Mode.AT_MOST_P:
        bounds = bounds_le(problem.n, problem.p)
    else:
        bounds = bounds_eq(problem.n, problem.p)
    lower_ok = q is None or bounds.lower <= q
    upper_ok = q is None or q <= bounds.upper
    return SolveReport(
        q=q,
        nodes=sum(s.nodes for s in all_searches),
        memo_hits=sum(s.hits for s in all_searches),
        prunes=sum(s.prunes for s in all_searches),
        elapsed=elapsed,
        bounds=bounds,
        lower_ok=lower_ok,
        upper_ok=upper_ok,
        conclusive=conclusive,
        warm_entries=warm,
    )


def breaker_majority_outcome(pattern: Pattern, i: int, j: int, p: int, mode: Mode) -> Pattern:
    """The merge outcome a count-maximising Breaker answers with.

    Ties go to the aligned outcome. The result always keeps a positive
    coloring count when the parent had one."""
    if count_colorings(pattern, p, mode) == 0:
        raise ValueError("parent pattern has no compatible coloring")
    aligned, crossed = merge_outcomes(pattern, i, j)
    if aligned == crossed:
        return aligned
    ca = count_colorings(aligned, p, mode)
    cc = count_colorings(crossed, p, mode)
    return aligned if ca >= cc else crossed


# ---------------------------------------------------------------------------
# Strategy evaluation: ground-truth mirror plus scripted/exploring Breakers.
# ---------------------------------------------------------------------------


class MakerStrategy(Protocol):
    name: str
    goal: str  # "identify" or "find-red"

    def run(self, problem: Problem, answers: Callable[[int, int], bool]) -> Any: ...


@lru_cache(maxsize=None)
def _cached_count(pattern: Pattern, p: int, mode: Mode) -> int:
    return count_colorings(pattern, p, mode)


@lru_cache(maxsize=None)
def _cached_majority_count(pattern: Pattern, n: int) -> int:
    # all colorings with strictly fewer green than red
    return sum(coloring_profile(pattern, (n - 1) // 2))


def _make_count_fn(goal: str, problem: Problem) -> Callable[[Pattern], int]:
    if goal == "find-red":
        n = problem.n
        return lambda pattern: _cached_majority_count(pattern, n)
    p, mode = problem.p, problem.mode
    return lambda pattern: _cached_count(pattern, p, mode)


class _Mirror:
    """Driver-side partition of balls, independent of strategy bookkeeping."""

    __slots__ = ("sides", "loc", "next_id")

    def __init__(self, n: int):
        self.sides: dict[int, tuple[set, set]] = {i: ({i}, set()) for i in range(n)}
        self.loc: dict[int, tuple[int, int]] = {i: (i, 0) for i in range(n)}
        self.next_id = n

    def shape(self, box: int) -> tuple[int, int]:
        a, b = self.sides[box]
        la, lb = len(a), len(b)
        return (la, lb) if la <= lb else (lb, la)

    def pattern(self) -> Pattern:
        return tuple(sorted(self.shape(b) for b in self.sides))

    def child_key(self, x: int, y: int, same: bool) -> Pattern:
        bx, ix = self.loc[x]
        by, iy = self.loc[y]
        sx = len(self.sides[bx][ix])
        ox = len(self.sides[bx][1 - ix])
        sy = len(self.sides[by][iy])
        oy = len(self.sides[by][1 - iy])
        if same:
            m = (sx + sy, ox + oy)
        else:
            m = (sx + oy, ox + sy)
        merged = (m[0], m[1]) if m[0] <= m[1] else (m[1], m[0])
        shapes = [self.shape(b) for b in self.sides if b != bx and b != by]
        shapes.append(merged)
        return tuple(sorted(shapes))

    def aligned_key(self, x: int, y: int) -> Pattern:
        """Child pattern that joins small sides with small sides."""
        bx, _ = self.loc[x]
        by, _ = self.loc[y]
        (a0, a1), (b0, b1) = self.shape(bx), self.shape(by)
        merged = (a0 + b0, a1 + b1)
        shapes = [self.shape(b) for b in self.sides if b != bx and b != by]
        shapes.append(merged)
        return tuple(sorted(shapes))

    def merge(self, x: int, y: int, same: bool) -> None:
        bx, ix = self.loc[x]
        by, iy = self.loc[y]
        xs, xo = self.sides[bx][ix], self.sides[bx][1 - ix]
        ys, yo = self.sides[by][iy], self.sides[by][1 - iy]
        if same:
            new = (xs | ys, xo | yo)
        else:
            new = (xs | yo, xo | ys)
        nid = self.next_id
        self.next_id += 1
        del self.sides[bx]
        del self.sides[by]
        self.sides[nid] = new
        for ball in new[0]:
            self.loc[ball] = (nid, 0)
        for ball in new[1]:
            self.loc[ball] = (nid, 1)


BreakerPolicy = Callable[[Pattern, int, Pattern, int, Pattern], bool]


def majority_breaker(
    pat_same: Pattern, c_same: int, pat_diff: Pattern, c_diff: int, aligned: Pattern
) -> bool:
    """Answer keeping the larger coloring count; ties pick the aligned merge."""
    if c_same != c_diff:
        return c_same > c_diff
    return pat_same == aligned


def random_breaker(seed: int) -> BreakerPolicy:
    """Uniformly random among the feasible answers, deterministic per seed."""
    rng = random.Random(seed)

    def policy(pat_same, c_same, pat_diff, c_diff, aligned):
        if c_same == 0:
            return False
        if c_diff == 0:
            return True
        return rng.random() < 0.5

    return policy


class _Breaker:
    """Answer callback handed to strategies.

    Replays a script of (x, y, answer) entries; past its end, forced answers
    (the other one leaves zero colorings) are appended in place, a genuine
    choice either consults the policy or raises _Fork for the exhaustive
    driver to branch on."""

    def __init__(
        self,
        n: int,
        count_fn: Callable[[Pattern], int],
        script: list,
        policy: BreakerPolicy | None = None,
    ):
        self.n = n
        self.count_fn = count_fn
        self.script = script
        self.pos = 0
        self.policy = policy
        self.mirror = _Mirror(n)

    def __call__(self, x: int, y: int) -> bool:
        n = self.n
        if not (0 <= x < n and 0 <= y < n):
            raise ValueError(f"ball id out of range: {x}, {y}")
        mirror = self.mirror
        if mirror.loc[x][0] == mirror.loc[y][0]:
            raise UnsoundStrategyError(f"comparison inside one box: balls {x}, {y}")
        if self.pos >= n - 1:
            raise StrategyCostError(f"more than {n - 1} comparisons requested")
        if self.pos < len(self.script):
            sx, sy, ans = self.script[self.pos]
            if (sx, sy) != (x, y):
                raise UnsoundStrategyError(
                    f"strategy is not deterministic: step {self.pos} asked "
                    f"({x}, {y}), expected ({sx}, {sy})"
                )
        else:
            key_same = mirror.child_key(x, y, True)
            key_diff = mirror.child_key(x, y, False)
            c_same = self.count_fn(key_same)
            c_diff = self.count_fn(key_diff)
            if c_same == 0 and c_diff == 0:
                raise AssertionError("both answers infeasible; parent count was zero")
            if self.policy is not None:
                ans = self.policy(key_same, c_same, key_diff, c_diff, mirror.aligned_key(x, y))
                if (c_same if ans else c_diff) == 0:
                    raise ValueError("breaker policy picked an infeasible answer")
            elif c_same > 0 and c_diff > 0:
                raise _Fork(list(self.script), x, y)
            else:
                ans = c_same > 0
            self.script.append((x, y, ans))
        mirror.merge(x, y, ans)
        self.pos += 1
        return ans


def _validate_leaf(strategy: MakerStrategy, problem: Problem, br: _Breaker, result: Any) -> None:
    if strategy.goal == "find-red":
        claimed, used = result
        if used != br.pos:
            raise UnsoundStrategyError(
                f"strategy reported {used} comparisons, driver saw {br.pos}"
            )
        claimed = frozenset(claimed)
        if not claimed:
            raise UnsoundStrategyError("empty red claim")
        box, _ = br.mirror.loc[min(claimed)]
        a, b = br.mirror.sides[box]
        if claimed != frozenset(a) and claimed != frozenset(b):
            raise UnsoundStrategyError("claimed red set is not one full box side")
        others_min = sum(
            min(len(s0), len(s1)) for bid, (s0, s1) in br.mirror.sides.items() if bid != box
        )
        if 2 * (len(claimed) + others_min) < problem.n:
            raise UnsoundStrategyError(
                "a compatible majority coloring can still turn the claimed box green"
            )
        return
    final = br.mirror.pattern()
    c = br.count_fn(final)
    if c != 1:
        raise UnsoundStrategyError(
            f"strategy finished with {c} compatible colorings on {final}"
        )


def worst_case_of_strategy(strategy: MakerStrategy, problem: Problem) -> int:
    """Exhaustive-Breaker worst case of a deterministic Maker strategy.

    Explores every answer sequence that keeps at least one compatible
    coloring, re-running the strategy per branch, and returns the maximum
    number of comparisons over all leaves. Every leaf is soundness-checked:
    identify strategies must end with exactly one compatible coloring,
    find-red strategies must claim a box side that is red under all of them.
    """
    count_fn = _make_count_fn(strategy.goal, problem)

    def explore(script: list) -> int:
        br = _Breaker(problem.n, count_fn, script)
        try:
            result = strategy.run(problem, br)
        except _Fork as fork:
            deep = 0
            for ans in (True, False):
                deep = max(deep, explore(fork.script + [(fork.x, fork.y, ans)]))
            return deep
        _validate_leaf(strategy, problem, br, result)
        return br.pos

    return explore([])


@dataclass(frozen=True)
class StrategyRun:
    """One strategy execution against a single Breaker policy."""

    steps: int
    final_pattern: Pattern
    boxes: int
    result: Any


def evaluate_strategy(
    strategy: MakerStrategy, problem: Problem, breaker: BreakerPolicy | None = None
) -> StrategyRun:
    """Run a strategy once against one Breaker policy (majority by default).

    The leaf is soundness-checked exactly as in worst_case_of_strategy."""
    count_fn = _make_count_fn(strategy.goal, problem)
    br = _Breaker(problem.n, count_fn, [], policy=breaker or majority_breaker)
    result = strategy.run(problem, br)
    _validate_leaf(strategy, problem, br, result)
    final = br.mirror.pattern()
    return StrategyRun(steps=br.pos, final_pattern=final, boxes=len(final), result=result)
