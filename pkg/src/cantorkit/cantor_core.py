"""Generic (I, R, r) Cantor sets: splitting, budgeted removal, intersections.

Every interval of a level is a cell of the uniform grid obtained by cutting the
root into ``R_0 R_1 ... R_{n-1}`` equal pieces, so an interval is stored as its
integer grid position.  Endpoints are recovered exactly on demand.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

from .rigor import (
    ClosedInterval,
    Real,
    as_fraction,
    compare,
    enclose,
    fraction_from_json,
    fraction_to_json,
)

__all__ = [
    "BudgetExceeded",
    "CantorBuild",
    "CantorSchedule",
    "LevelCollection",
    "LevelMismatch",
    "MismatchedFrame",
    "RemovalLedger",
    "apply_removals",
    "build",
    "check_counting",
    "check_nesting",
    "greedy_adversary",
    "intersect_builds",
    "intersect_levels",
    "intersect_schedules",
    "middle_rule",
    "no_removal",
    "offset_rule",
    "random_rule",
    "root_level",
    "split",
    "union_rule",
]

Budget = Union[Fraction, Real]


class BudgetExceeded(Exception):
    def __init__(self, m: int, ancestor: int, count: int, budget):
        self.m, self.ancestor, self.count, self.budget = m, ancestor, count, budget
        super().__init__(
            f"{count} deletions charged to level-{m} ancestor #{ancestor} exceed budget {budget}"
        )


class MismatchedFrame(ValueError):
    """Schedules or builds do not share the root interval and branching sequence."""


class LevelMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# schedules


def _sum_budgets(values: Sequence[Budget]) -> Budget:
    if not any(isinstance(v, Real) for v in values):
        return sum((as_fraction(v) for v in values), Fraction(0))
    k = len(values)

    def fn(eps):
        total = enclose(Fraction(0), eps)
        for v in values:
            total = total + enclose(v, eps / k)
        return total

    return Real(fn, label="sum")


class CantorSchedule:
    """The triple (I, R, r).

    ``branching`` is a finite sequence or a callable ``n -> R_n``.  ``budgets``
    is a sparse mapping ``(m, n) -> r_{m,n}`` or a callable ``n -> {m: r_{m,n}}``
    giving one row at a time.  Budget values are exact rationals or
    :class:`~cantorkit.rigor.Real` values known only through enclosures.
    """

    def __init__(
        self,
        root: ClosedInterval,
        branching: Sequence[int] | Callable[[int], int],
        budgets: Mapping[tuple[int, int], Budget] | Callable[[int], Mapping[int, Budget]] = (),
        *,
        nondecreasing: bool | None = None,
        name: str = "",
    ):
        if root.length <= 0:
            raise ValueError("root interval must have positive length")
        self.root = root
        self.name = name
        if callable(branching):
            self._branching_fn = branching
            self._branching = None
            self.horizon = None
        else:
            self._branching = tuple(int(x) for x in branching)
            self._branching_fn = None
            self.horizon = len(self._branching)
            if any(x < 2 for x in self._branching):
                raise ValueError("every R_n must be at least 2")
        if callable(budgets):
            self._row_fn = budgets
            self._rows = None
        else:
            rows: dict[int, dict[int, Budget]] = {}
            for (m, n), v in dict(budgets).items():
                if not 0 <= m <= n:
                    raise ValueError(f"budget index ({m}, {n}) needs 0 <= m <= n")
                if not isinstance(v, Real):
                    v = as_fraction(v)
                    if v < 0:
                        raise ValueError(f"negative budget r_{m},{n} = {v}")
                    if v == 0:
                        continue
                rows.setdefault(n, {})[m] = v
            self._rows = rows
            self._row_fn = None
        if nondecreasing is None and self._branching is not None:
            nondecreasing = False
        self.nondecreasing = bool(nondecreasing)
        if self.nondecreasing and self._branching is not None:
            if any(a > b for a, b in zip(self._branching, self._branching[1:])):
                raise ValueError("branching sequence declared nondecreasing but it decreases")
        self._row_cache: dict[int, dict[int, Budget]] = {}

    def R(self, n: int) -> int:
        if self._branching is not None:
            if n >= len(self._branching):
                raise IndexError(f"schedule {self.name!r} has no R_{n} (horizon {self.horizon})")
            return self._branching[n]
        value = int(self._branching_fn(n))
        if value < 2:
            raise ValueError(f"R_{n} = {value} < 2")
        return value

    def budget_row(self, n: int) -> dict[int, Budget]:
        """Nonzero budgets ``{m: r_{m,n}}`` for one level."""
        if self._rows is not None:
            return self._rows.get(n, {})
        row = self._row_cache.get(n)
        if row is None:
            row = {m: v for m, v in self._row_fn(n).items() if isinstance(v, Real) or v != 0}
            self._row_cache[n] = row
        return row

    def r(self, m: int, n: int) -> Budget:
        return self.budget_row(n).get(m, Fraction(0))

    def is_local(self, depth: int) -> bool:
        return all(set(self.budget_row(n)) <= {n} for n in range(depth))

    def branching_prefix(self, length: int) -> tuple[int, ...]:
        return tuple(self.R(n) for n in range(length))

    # -- construction helpers ------------------------------------------------

    @classmethod
    def constant(cls, R: int, diagonal=0, *, root: ClosedInterval | None = None,
                 horizon: int | None = None, name: str = "") -> "CantorSchedule":
        """Constant branching ``R`` with diagonal budgets ``r_{n,n} = diagonal``."""
        root = root or ClosedInterval(0, 1)
        diagonal = as_fraction(diagonal)
        if horizon is None:
            return cls(root, lambda n: R, lambda n: {n: diagonal}, nondecreasing=True, name=name)
        return cls(root, [R] * horizon, {(n, n): diagonal for n in range(horizon)},
                   nondecreasing=True, name=name)

    @classmethod
    def middle_third(cls, horizon: int | None = None) -> "CantorSchedule":
        return cls.constant(3, 1, horizon=horizon, name="middle-third")

    def truncated(self, horizon: int) -> "CantorSchedule":
        """Finite copy of the first ``horizon`` levels (budgets must be exact)."""
        budgets = {}
        for n in range(horizon):
            for m, v in self.budget_row(n).items():
                if isinstance(v, Real):
                    raise ValueError("cannot tabulate a schedule with non-rational budgets")
                budgets[(m, n)] = v
        return CantorSchedule(self.root, self.branching_prefix(horizon), budgets,
                              nondecreasing=self.nondecreasing, name=self.name)

    def to_json(self, horizon: int | None = None) -> dict:
        horizon = self.horizon if horizon is None else horizon
        if horizon is None:
            raise ValueError("an unbounded schedule needs an explicit horizon to serialize")
        budgets = []
        for n in range(horizon):
            for m, v in sorted(self.budget_row(n).items()):
                if isinstance(v, Real):
                    raise ValueError("budgets defined through enclosures are not serializable")
                budgets.append({"m": m, "n": n, "value": fraction_to_json(v)})
        return {
            "root": self.root.to_json(),
            "branching": list(self.branching_prefix(horizon)),
            "budgets": budgets,
            "nondecreasing": self.nondecreasing,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CantorSchedule":
        root = ClosedInterval.from_json(obj["root"])
        budgets = {(int(b["m"]), int(b["n"])): fraction_from_json(b["value"]) for b in obj.get("budgets", [])}
        return cls(root, [int(x) for x in obj["branching"]], budgets,
                   nondecreasing=bool(obj.get("nondecreasing", False)), name=obj.get("name", ""))

    def __repr__(self):
        return f"CantorSchedule({self.name or 'unnamed'}, root={self.root}, horizon={self.horizon})"


def intersect_schedules(schedules: Sequence[CantorSchedule], check_horizon: int = 64) -> CantorSchedule:
    """Schedule whose budgets are the entrywise sums (frame must be shared).

    Unbounded branching sequences are compared over the first ``check_horizon`` levels.
    """
    if not schedules:
        raise ValueError("need at least one schedule")
    first = schedules[0]
    if len(schedules) == 1:
        return first
    for s in schedules[1:]:
        if s.root != first.root:
            raise MismatchedFrame(f"roots differ: [{first.root.left}, {first.root.right}] "
                                  f"vs [{s.root.left}, {s.root.right}]")
    horizons = [s.horizon for s in schedules]
    if all(h is not None for h in horizons):
        if len(set(horizons)) != 1:
            raise MismatchedFrame(f"branching sequences have different lengths {horizons}")
        length = horizons[0]
    else:
        length = min([h for h in horizons if h is not None] + [check_horizon])
    ref = first.branching_prefix(length)
    for s in schedules[1:]:
        if s.branching_prefix(length) != ref:
            raise MismatchedFrame("branching sequences differ")

    def row(n: int) -> dict[int, Budget]:
        keys = sorted(set().union(*(s.budget_row(n) for s in schedules)))
        return {m: _sum_budgets([s.r(m, n) for s in schedules]) for m in keys}

    name = "+".join(s.name or "?" for s in schedules)
    if all(h is not None for h in horizons):
        budgets = {}
        for n in range(length):
            for m, v in row(n).items():
                budgets[(m, n)] = v
        return CantorSchedule(first.root, ref, budgets, nondecreasing=first.nondecreasing, name=name)
    return CantorSchedule(first.root, first.R, row,
                          nondecreasing=all(s.nondecreasing for s in schedules), name=name)


# ---------------------------------------------------------------------------
# levels


@dataclass(frozen=True)
class LevelCollection:
    """Survivors (or split candidates) at one level, as sorted grid positions.

    ``scale`` is the number of grid cells covering the root at this level and
    ``parents[i]`` is the position, in the previous level's list, of the
    interval containing ``indices[i]``.
    """

    level: int
    root: ClosedInterval
    scale: int
    indices: tuple[int, ...]
    parents: tuple[int, ...] = ()

    @property
    def length(self) -> Fraction:
        return self.root.length / self.scale

    def interval(self, i: int) -> ClosedInterval:
        idx = self.indices[i]
        step = self.length
        return ClosedInterval(self.root.left + idx * step, self.root.left + (idx + 1) * step)

    def grid_interval(self, idx: int) -> ClosedInterval:
        step = self.length
        return ClosedInterval(self.root.left + idx * step, self.root.left + (idx + 1) * step)

    @property
    def intervals(self) -> tuple[ClosedInterval, ...]:
        return tuple(self.grid_interval(idx) for idx in self.indices)

    @property
    def parent_of(self) -> dict[int, int]:
        return dict(enumerate(self.parents))

    def __len__(self) -> int:
        return len(self.indices)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "intervals": [iv.to_json() for iv in self.intervals],
            "parents": list(self.parents),
            "root": self.root.to_json(),
            "scale": self.scale,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LevelCollection":
        intervals = [ClosedInterval.from_json(x) for x in obj["intervals"]]
        parents = tuple(int(p) for p in obj.get("parents", []))
        if "root" in obj and "scale" in obj:
            root = ClosedInterval.from_json(obj["root"])
            scale = int(obj["scale"])
        else:
            if not intervals:
                raise ValueError("an empty level file needs 'root' and 'scale'")
            step = intervals[0].length
            left = min(iv.left for iv in intervals)
            scale = int(max((iv.left - left) / step for iv in intervals)) + 1
            root = ClosedInterval(left, left + scale * step)
        step = root.length / scale
        indices = []
        for iv in intervals:
            pos = (iv.left - root.left) / step
            if pos.denominator != 1 or iv.length != step:
                raise ValueError(f"interval {iv} is not a cell of the level grid")
            indices.append(int(pos))
        if indices != sorted(indices):
            raise ValueError("level intervals must be sorted")
        return cls(int(obj["level"]), root, scale, tuple(indices), parents)


def root_level(schedule: CantorSchedule) -> LevelCollection:
    return LevelCollection(0, schedule.root, 1, (0,), ())


def split(parents: LevelCollection, R_n: int) -> LevelCollection:
    """Cut every interval into ``R_n`` equal closed children."""
    if R_n < 2:
        raise ValueError("R_n must be at least 2")
    indices = []
    parent_pos = []
    for p, idx in enumerate(parents.indices):
        base = idx * R_n
        indices.extend(range(base, base + R_n))
        parent_pos.extend([p] * R_n)
    return LevelCollection(parents.level + 1, parents.root, parents.scale * R_n,
                           tuple(indices), tuple(parent_pos))


# ---------------------------------------------------------------------------
# removal


@dataclass
class RemovalLedger:
    """Deletions made while passing from level ``n`` to ``n + 1``.

    ``counts[(m, a)]`` is the number of candidates removed and charged to the
    level-``m`` ancestor with grid position ``a``.
    """

    n: int
    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    removed: tuple[int, ...] = ()

    def total(self) -> int:
        return sum(self.counts.values())

    def by_stratum(self) -> dict[int, int]:
        out: Counter = Counter()
        for (m, _), c in self.counts.items():
            out[m] += c
        return dict(out)

    def replay(self, schedule: CantorSchedule) -> bool:
        """True when every recorded count is within its budget."""
        return all(compare(c, schedule.r(m, self.n)) <= 0 for (m, _), c in self.counts.items())

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "counts": [{"m": m, "ancestor": a, "count": c} for (m, a), c in sorted(self.counts.items())],
            "removed": list(self.removed),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RemovalLedger":
        counts = {(int(x["m"]), int(x["ancestor"])): int(x["count"]) for x in obj["counts"]}
        return cls(int(obj["n"]), counts, tuple(obj.get("removed", ())))


# A removal rule maps (n, candidates, history J_0..J_n, schedule) to
# (candidate position, charged stratum m) pairs.
RemovalRule = Callable[[int, LevelCollection, Sequence[LevelCollection], CantorSchedule], Iterable[tuple[int, int]]]


def _ancestor(candidates: LevelCollection, history: Sequence[LevelCollection], pos: int, m: int) -> int:
    """Grid position, at level ``m``, of the ancestor of candidate ``pos``."""
    ratio = candidates.scale // history[m].scale
    return candidates.indices[pos] // ratio


def apply_removals(
    candidates: LevelCollection,
    rule: RemovalRule,
    schedule: CantorSchedule,
    history: Sequence[LevelCollection],
) -> tuple[LevelCollection, RemovalLedger]:
    """Run the rule's deletions, strata ``n, n-1, ..., 0`` in turn, enforcing budgets."""
    n = candidates.level - 1
    if len(history) != n + 1:
        raise ValueError(f"history must hold levels 0..{n}, got {len(history)} levels")
    requested: dict[int, int] = {}
    for pos, m in rule(n, candidates, history, schedule):
        if not 0 <= pos < len(candidates):
            raise ValueError(f"rule deleted nonexistent candidate {pos}")
        if not 0 <= m <= n:
            raise ValueError(f"rule charged stratum {m} outside 0..{n}")
        # descending execution: a child is charged to the highest stratum that lists it
        if requested.get(pos, -1) < m:
            requested[pos] = m
    counts: Counter = Counter()
    for pos, m in requested.items():
        counts[(m, _ancestor(candidates, history, pos, m))] += 1
    row = schedule.budget_row(n)
    for (m, a), c in sorted(counts.items(), key=lambda kv: (-kv[0][0], kv[0][1])):
        budget = row.get(m, Fraction(0))
        if compare(c, budget) > 0:
            raise BudgetExceeded(m, a, c, budget)
    keep = [i for i in range(len(candidates)) if i not in requested]
    survivors = LevelCollection(
        candidates.level,
        candidates.root,
        candidates.scale,
        tuple(candidates.indices[i] for i in keep),
        tuple(candidates.parents[i] for i in keep),
    )
    removed = tuple(sorted(candidates.indices[i] for i in requested))
    return survivors, RemovalLedger(n, dict(counts), removed)


@dataclass
class CantorBuild:
    """Levels ``J_0 ... J_N`` and the ledgers of each removal step.

    Iterating yields the levels.  ``empty_at`` is the first empty level, if any;
    construction stops there.
    """

    schedule: CantorSchedule
    levels: list[LevelCollection]
    ledgers: list[RemovalLedger]
    empty_at: int | None = None

    def __getitem__(self, n: int) -> LevelCollection:
        return self.levels[n]

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def counts(self) -> list[int]:
        return [len(level) for level in self.levels]


def build(schedule: CantorSchedule, rule: RemovalRule, depth: int) -> CantorBuild:
    """Build ``J_0 ... J_depth``; an empty level is reported, not raised."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    levels = [root_level(schedule)]
    ledgers: list[RemovalLedger] = []
    for n in range(depth):
        candidates = split(levels[n], schedule.R(n))
        survivors, ledger = apply_removals(candidates, rule, schedule, levels)
        levels.append(survivors)
        ledgers.append(ledger)
        if not survivors.indices:
            return CantorBuild(schedule, levels, ledgers, empty_at=n + 1)
    return CantorBuild(schedule, levels, ledgers)


def check_nesting(levels: Sequence[LevelCollection]) -> bool:
    """Each interval lies in the interval its parent link names, with exact lengths."""
    for prev, cur in zip(levels, levels[1:]):
        if cur.scale % prev.scale:
            return False
        ratio = cur.scale // prev.scale
        if len(cur.parents) != len(cur.indices):
            return False
        for idx, p in zip(cur.indices, cur.parents):
            if not 0 <= p < len(prev) or idx // ratio != prev.indices[p]:
                return False
        if list(cur.indices) != sorted(set(cur.indices)):
            return False
    return True


def check_counting(b: CantorBuild) -> list[bool]:
    """``#J_{n+1} >= R_n #J_n - sum_k r_{k,n} #J_k`` for every built step."""
    out = []
    sizes = b.counts()
    for n in range(len(b.levels) - 1):
        row = b.schedule.budget_row(n)
        removed_cap = [(v, sizes[k]) for k, v in row.items()]

        def slack(eps, n=n, removed_cap=removed_cap):
            total = enclose(Fraction(sizes[n + 1] - b.schedule.R(n) * sizes[n]), eps)
            for v, size in removed_cap:
                total = total + enclose(v, eps / (len(removed_cap) or 1)) * size
            return total

        if all(not isinstance(v, Real) for v, _ in removed_cap):
            out.append(slack(Fraction(1)).lo >= 0)
        else:
            out.append(compare(Real(slack), 0) >= 0)
    return out


# ---------------------------------------------------------------------------
# stock removal rules


def no_removal(n, candidates, history, schedule):
    return ()


def offset_rule(offsets: Iterable[int]) -> RemovalRule:
    """Delete the children at the given offsets inside each parent, charged to stratum ``n``."""
    offsets = tuple(offsets)

    def rule(n, candidates, history, schedule):
        R = schedule.R(n)
        for pos, idx in enumerate(candidates.indices):
            if idx % R in offsets:
                yield pos, n

    return rule


def middle_rule(k: int = 1) -> RemovalRule:
    """Delete the ``k`` middle children of each parent, charged to stratum ``n``."""

    def rule(n, candidates, history, schedule):
        R = schedule.R(n)
        start = (R - k) // 2
        for pos, idx in enumerate(candidates.indices):
            if start <= idx % R < start + k:
                yield pos, n

    return rule


def union_rule(*rules: RemovalRule) -> RemovalRule:
    """Delete whatever any of the rules deletes."""

    def rule(n, candidates, history, schedule):
        out = []
        for r in rules:
            out.extend(r(n, candidates, history, schedule))
        return out

    return rule


def _integer_budget(v) -> int:
    """Largest deletion count a budget allows."""
    if isinstance(v, Real):
        enc = v.enclose(Fraction(1, 1 << 40))
        lo = int(enc.lo // 1)
        return lo if compare(lo + 1, v) > 0 else lo + 1
    return int(as_fraction(v) // 1)


def greedy_adversary(order: str = "left", rng: random.Random | None = None) -> RemovalRule:
    """Saturate every budget, strata ``n`` down to ``0``.

    ``order`` picks which children go first inside an ancestor: ``"left"``,
    ``"right"``, ``"random"`` or ``"cluster"`` (children of the sparsest
    parents first, to wipe out whole parents).
    """
    rng = rng or random.Random(0)

    def rule(n, candidates, history, schedule):
        alive = set(range(len(candidates)))
        deletions = []
        for m in sorted(schedule.budget_row(n), reverse=True):
            cap = _integer_budget(schedule.r(m, n))
            if cap <= 0:
                continue
            groups: dict[int, list[int]] = {}
            for pos in sorted(alive):
                groups.setdefault(_ancestor(candidates, history, pos, m), []).append(pos)
            for members in groups.values():
                if order == "right":
                    members = members[::-1]
                elif order == "random":
                    members = members[:]
                    rng.shuffle(members)
                elif order == "cluster":
                    per_parent = Counter(candidates.parents[p] for p in members)
                    members = sorted(members, key=lambda p: (per_parent[candidates.parents[p]], p))
                for pos in members[:cap]:
                    alive.discard(pos)
                    deletions.append((pos, m))
        return deletions

    return rule


def random_rule(rng: random.Random, fill: float = 1.0) -> RemovalRule:
    """Random budget-respecting deletions; each ancestor uses a random share of its budget."""

    def rule(n, candidates, history, schedule):
        alive = set(range(len(candidates)))
        deletions = []
        for m in sorted(schedule.budget_row(n), reverse=True):
            cap = _integer_budget(schedule.r(m, n))
            groups: dict[int, list[int]] = {}
            for pos in sorted(alive):
                groups.setdefault(_ancestor(candidates, history, pos, m), []).append(pos)
            for members in groups.values():
                k = rng.randint(0, cap) if fill < 1 and rng.random() > fill else cap
                for pos in rng.sample(members, min(k, len(members))):
                    alive.discard(pos)
                    deletions.append((pos, m))
        return deletions

    return rule


# ---------------------------------------------------------------------------
# intersections


def intersect_levels(a: LevelCollection, b: LevelCollection) -> LevelCollection:
    """Intervals present in both collections (exact endpoints), in ``a``'s frame.

    Parent links refer to ``a``'s previous level.
    """
    if a.level != b.level:
        raise LevelMismatch(f"levels differ: {a.level} vs {b.level}")
    if a.length != b.length:
        raise LevelMismatch(f"interval lengths differ: {a.length} vs {b.length}")
    if a.root == b.root and a.scale == b.scale:
        common = set(b.indices)
        keep = [i for i, idx in enumerate(a.indices) if idx in common]
    else:
        common_iv = set(b.intervals)
        keep = [i for i in range(len(a)) if a.interval(i) in common_iv]
    return LevelCollection(
        a.level, a.root, a.scale,
        tuple(a.indices[i] for i in keep),
        tuple(a.parents[i] for i in keep) if a.parents else (),
    )


def intersect_builds(*builds: Sequence[LevelCollection]) -> list[LevelCollection]:
    """Level-by-level intersection with parent links recomputed for the result."""
    depth = min(len(b) for b in builds)
    out: list[LevelCollection] = []
    for n in range(depth):
        level = builds[0][n]
        for other in builds[1:]:
            level = intersect_levels(level, other[n])
        if n == 0:
            out.append(level)
            continue
        prev = out[-1]
        ratio = level.scale // prev.scale
        where = {idx: p for p, idx in enumerate(prev.indices)}
        keep = [idx for idx in level.indices if idx // ratio in where]
        out.append(LevelCollection(n, level.root, level.scale, tuple(keep),
                                   tuple(where[idx // ratio] for idx in keep)))
    return out
