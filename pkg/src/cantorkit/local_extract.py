"""Local sub-Cantor sets, their uniform mass distribution, and interval-distribution checks.

Given built levels ``J_0 ... J_N`` of an (I, R, r) set, :func:`extract_local`
keeps only intervals that retain at least ``R_m - s_m`` good children at every
later level, with ``s_m = R_m / 2``.  The surviving nested family carries the
uniform measure of :func:`build_measure`, whose local dimension is checked
against ``a |B|^s`` by :func:`verify_mdp_bound`.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from typing import Iterable, Sequence

from .cantor_core import CantorBuild, CantorSchedule, LevelCollection, MismatchedFrame
from .certify import check_condition13
from .rigor import ClosedInterval, as_fraction, fraction_to_json

__all__ = [
    "AuxiliaryTable",
    "DistributionReport",
    "EmptyExtraction",
    "EmptyLevel",
    "InvariantViolation",
    "LocalSchedule",
    "MdpReport",
    "MeasureTable",
    "adversarial_family",
    "build_measure",
    "check_conditions",
    "check_distribution",
    "dyadic_intervals",
    "extract_local",
    "mdp_constant",
    "random_intervals",
    "validate_local",
    "verify_mdp_bound",
]


class EmptyExtraction(Exception):
    def __init__(self, m: int, n: int):
        self.m, self.n = m, n
        super().__init__(f"L[{m}][{n}] is empty")


class InvariantViolation(AssertionError):
    pass


class EmptyLevel(ValueError):
    pass


def _levels_of(levels) -> list[LevelCollection]:
    return list(levels.levels if isinstance(levels, CantorBuild) else levels)


@dataclass(frozen=True)
class LocalSchedule:
    """Branching of ``base`` with diagonal budgets ``s_n = R_n / 2``."""

    base: CantorSchedule

    def s(self, n: int) -> Fraction:
        return Fraction(self.base.R(n), 2)

    def t(self, n: int) -> Fraction:
        return self.base.R(n) - self.s(n)

    def as_schedule(self, horizon: int) -> CantorSchedule:
        return CantorSchedule(
            self.base.root,
            self.base.branching_prefix(horizon),
            {(n, n): self.s(n) for n in range(horizon)},
            nondecreasing=self.base.nondecreasing,
            name=f"local({self.base.name})",
        )

    def complement(self, horizon: int) -> CantorSchedule:
        """The (I, R, R - s) schedule used for the distribution check."""
        return CantorSchedule(
            self.base.root,
            self.base.branching_prefix(horizon),
            {(n, n): self.t(n) for n in range(horizon)},
            name=f"complement({self.base.name})",
        )


# ---------------------------------------------------------------------------
# extraction


@dataclass
class AuxiliaryTable:
    """``L[m][n]`` and ``Rdump[m][n]`` as frozensets of grid positions at level ``m``.

    ``stable_from[m]`` is the first ``n`` after which ``L[m][n]`` no longer
    changed within the computed horizon.
    """

    depth: int
    L: list[list[frozenset]] = field(default_factory=list)
    Rdump: list[list[frozenset]] = field(default_factory=list)
    stable_from: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        cells = []
        for m in range(self.depth + 1):
            for n in range(m, self.depth + 1):
                cells.append({"m": m, "n": n, "L": len(self.L[m][n - m]), "Rdump": len(self.Rdump[m][n - m])})
        return {
            "depth": self.depth,
            "cells": cells,
            "stabilization": [
                {"m": m, "N": N, "label": "empirical"} for m, N in enumerate(self.stable_from)
            ],
        }

    def get_L(self, m: int, n: int) -> frozenset:
        return self.L[m][n - m]

    def get_R(self, m: int, n: int) -> frozenset:
        return self.Rdump[m][n - m]


def extract_local(levels, schedule: CantorSchedule) -> tuple[list[LevelCollection], AuxiliaryTable]:
    """Nested local family ``L_m = L[m][N]`` inside the built levels.

    Raises :class:`EmptyExtraction` when some ``L[m][n]`` empties out, or
    :class:`InvariantViolation` if that happens while the dimension condition
    holds for the schedule.
    """
    J = _levels_of(levels)
    N = len(J) - 1
    local = LocalSchedule(schedule)
    J_sets = [frozenset(level.indices) for level in J]
    Rs = [schedule.R(n) for n in range(N)]

    L: list[set] = [set(J_sets[0])]
    Rd: list[set] = [set()]
    table = AuxiliaryTable(N, [[frozenset(L[0])]], [[frozenset()]])

    for n in range(N):
        R_n = Rs[n]
        new_L = [None] * (n + 2)
        new_R = [None] * (n + 2)
        new_L[n + 1] = {c for c in J_sets[n + 1] if c // R_n in L[n]}
        new_R[n + 1] = {c for p in L[n] for c in range(p * R_n, (p + 1) * R_n) if c not in J_sets[n + 1]}
        for u in range(n, -1, -1):
            dumped_children = Counter(x // Rs[u] for x in new_R[u + 1])
            threshold = local.s(u)
            moved = {p for p in L[u] if dumped_children[p] >= threshold}
            new_L[u] = L[u] - moved
            new_R[u] = Rd[u] | moved
        for u in range(1, n + 2):
            new_L[u] = {c for c in new_L[u] if c // Rs[u - 1] in new_L[u - 1]}
        L, Rd = new_L, new_R
        table.L.append([])
        table.Rdump.append([])
        for m in range(n + 2):
            table.L[m].append(frozenset(L[m]))
            table.Rdump[m].append(frozenset(Rd[m]))
        empty = next((m for m in range(n + 2) if not L[m]), None)
        if empty is not None:
            if check_condition13(schedule, n + 1).passed:
                raise InvariantViolation(
                    f"L[{empty}][{n + 1}] is empty although the dimension condition holds"
                )
            raise EmptyExtraction(empty, n + 1)

    for m in range(N + 1):
        row = table.L[m]
        k = len(row) - 1
        while k > 0 and row[k - 1] == row[-1]:
            k -= 1
        table.stable_from.append(m + k)

    out: list[LevelCollection] = []
    for m in range(N + 1):
        indices = tuple(sorted(L[m]))
        if m == 0:
            parents: tuple[int, ...] = ()
        else:
            where = {idx: p for p, idx in enumerate(out[-1].indices)}
            parents = tuple(where[idx // Rs[m - 1]] for idx in indices)
        out.append(LevelCollection(m, J[m].root, J[m].scale, indices, parents))
    return out, table


def check_conditions(table: AuxiliaryTable, levels, schedule: CantorSchedule) -> list[str]:
    """Exact set checks of C1 (containment), C2 (nesting) and C3 (child counts); returns violations."""
    J_sets = [frozenset(level.indices) for level in _levels_of(levels)]
    local = LocalSchedule(schedule)
    problems = []
    for n in range(table.depth + 1):
        for m in range(n + 1):
            Lmn = table.get_L(m, n)
            if not Lmn <= J_sets[m]:
                problems.append(f"C1 fails at ({m}, {n})")
            if m < n:
                R_m = schedule.R(m)
                Lnext = table.get_L(m + 1, n)
                if any(c // R_m not in Lmn for c in Lnext):
                    problems.append(f"C2 fails at ({m}, {n})")
                counts = Counter(c // R_m for c in Lnext)
                need = local.t(m)
                if any(counts[p] < need for p in Lmn):
                    problems.append(f"C3 fails at ({m}, {n})")
    return problems


def validate_local(levels: Sequence[LevelCollection], schedule: CantorSchedule) -> bool:
    """True when the levels form a local (I, R, s) build: nested and at most ``s_n`` losses per parent."""
    local = LocalSchedule(schedule)
    for n in range(len(levels) - 1):
        R_n = schedule.R(n)
        parents = set(levels[n].indices)
        kids = Counter(c // R_n for c in levels[n + 1].indices)
        if any(p not in parents for p in kids):
            return False
        if any(R_n - kids[p] > local.s(n) for p in parents):
            return False
    return True


# ---------------------------------------------------------------------------
# measure


@dataclass
class MeasureTable:
    """Uniform-split weights on a nested family of levels."""

    levels: list[LevelCollection]
    weights: list[dict[int, Fraction]]

    def weight(self, n: int, idx: int) -> Fraction:
        return self.weights[n][idx]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def check_additivity(self) -> bool:
        for n in range(self.depth):
            ratio = self.levels[n + 1].scale // self.levels[n].scale
            sums: dict[int, Fraction] = {}
            for idx, w in self.weights[n + 1].items():
                sums[idx // ratio] = sums.get(idx // ratio, Fraction(0)) + w
            if sums != self.weights[n]:
                return False
        return all(w > 0 for level in self.weights for w in level.values())

    def _finest(self):
        cache = getattr(self, "_prefix", None)
        if cache is None:
            level = self.levels[-1]
            idx = list(level.indices)
            w = [self.weights[-1][i] for i in idx]
            cache = (idx, [Fraction(0)] + list(accumulate(w)))
            self._prefix = cache
        return cache

    def mass_upper(self, B: ClosedInterval) -> Fraction:
        """Total weight of finest-level intervals overlapping ``B`` in positive length.

        The measure has no atoms, so this bounds ``mu(B)`` from above.
        """
        if B.length == 0:
            return Fraction(0)
        level = self.levels[-1]
        step = level.length
        lo = (B.left - level.root.left) / step
        hi = (B.right - level.root.left) / step
        i_min = math.floor(lo)
        i_max = math.ceil(hi) - 1
        idx, prefix = self._finest()
        a = bisect_left(idx, i_min)
        b = bisect_right(idx, i_max)
        return prefix[b] - prefix[a] if b > a else Fraction(0)

    def to_json(self) -> dict:
        return {
            "levels": [
                [{"index": i, "weight": fraction_to_json(w)} for i, w in sorted(level.items())]
                for level in self.weights
            ]
        }


def build_measure(levels: Sequence[LevelCollection]) -> MeasureTable:
    levels = list(levels)
    weights: list[dict[int, Fraction]] = []
    for n, level in enumerate(levels):
        if not level.indices:
            raise EmptyLevel(f"level {n} is empty")
        if n == 0:
            weights.append({idx: Fraction(1, len(level)) for idx in level.indices})
            continue
        ratio = level.scale // levels[n - 1].scale
        kids = Counter(idx // ratio for idx in level.indices)
        prev = weights[-1]
        for p in prev:
            if kids[p] == 0:
                raise EmptyLevel(f"interval {p} of level {n - 1} has no children")
        weights.append({idx: prev[idx // ratio] / kids[idx // ratio] for idx in level.indices})
    return MeasureTable(levels, weights)


# ---------------------------------------------------------------------------
# mass distribution bound


@dataclass
class MdpReport:
    s: Fraction
    n0: int
    a_approx: float
    checked: int
    failures: list[ClosedInterval]
    max_ratio: float
    out_of_scope: int
    passed: bool

    def to_json(self) -> dict:
        return {
            "s": fraction_to_json(self.s),
            "n0": self.n0,
            "a": self.a_approx,
            "checked": self.checked,
            "failures": [b.to_json() for b in self.failures[:20]],
            "failure_count": len(self.failures),
            "max_ratio": self.max_ratio,
            "out_of_scope": self.out_of_scope,
            "verdict": "pass" if self.passed else "fail",
        }


def mdp_constant(schedule: CantorSchedule, s, n0: int) -> float:
    """Floating value of ``2 |I|^{-s} prod_{i <= n0} R_i^s / t_i`` (for reporting)."""
    s = as_fraction(s)
    local = LocalSchedule(schedule)
    log_a = math.log(2) - float(s) * math.log(schedule.root.length)
    for i in range(n0 + 1):
        log_a += float(s) * math.log(schedule.R(i)) - math.log(local.t(i))
    return math.exp(log_a)


def verify_mdp_bound(measure: MeasureTable, schedule: CantorSchedule, s, n0: int,
                     test_intervals: Iterable[ClosedInterval]) -> MdpReport:
    """Check ``mu(B) <= a |B|^s`` on each test interval with ``|B| < delta_{n0}``.

    With ``s = p/q``, ``a |B|^s = (2 / P) X^s`` where ``P = prod t_i`` and
    ``X = |B| prod R_i / |I|`` over ``i <= n0``, so the comparison is the exact
    integer-power test ``(mu P / 2)^q <= X^p``.
    """
    s = as_fraction(s)
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    p, q = s.numerator, s.denominator
    local = LocalSchedule(schedule)
    depth = measure.depth
    for n in range(n0 + 1, depth):
        if Fraction(schedule.R(n)) ** p > local.t(n) ** q:
            raise ValueError(f"R_{n}^s > t_{n}: s = {s} is too large beyond n0 = {n0}")
    root = schedule.root
    P = Fraction(1)
    Rprod = 1
    for i in range(n0 + 1):
        P *= local.t(i)
        Rprod *= schedule.R(i)
    delta_n0 = root.length / math.prod(schedule.R(i) for i in range(n0))
    a = mdp_constant(schedule, s, n0)
    failures = []
    checked = 0
    out_of_scope = 0
    max_ratio = 0.0
    for B in test_intervals:
        if B.length <= 0:
            continue
        if B.length >= delta_n0:
            out_of_scope += 1
            continue
        mu = measure.mass_upper(B)
        checked += 1
        if mu == 0:
            continue
        X = B.length * Rprod / root.length
        lhs = (mu * P / 2) ** q
        if lhs > X ** p:
            failures.append(B)
        ratio = float(mu) / (a * float(B.length) ** float(s))
        max_ratio = max(max_ratio, ratio)
    return MdpReport(s, n0, a, checked, failures, max_ratio, out_of_scope, not failures)


def dyadic_intervals(root: ClosedInterval, min_length: Fraction, max_length: Fraction | None = None):
    """All ``[root.left + j L / 2^k, root.left + (j+1) L / 2^k]`` with lengths in range."""
    k = 0
    while True:
        length = root.length / (1 << k)
        if length < min_length:
            return
        if max_length is None or length <= max_length:
            for j in range(1 << k):
                yield ClosedInterval(root.left + j * length, root.left + (j + 1) * length)
        k += 1


def random_intervals(root: ClosedInterval, count: int, rng: random.Random, min_length: Fraction,
                     max_length: Fraction, denominator: int = 1 << 30):
    """Random sub-intervals of ``root`` with rational endpoints."""
    for _ in range(count):
        length = min_length + (max_length - min_length) * Fraction(rng.randrange(denominator), denominator)
        room = root.length - length
        if room < 0:
            continue
        left = root.left + room * Fraction(rng.randrange(denominator + 1), denominator)
        yield ClosedInterval(left, left + length)


# ---------------------------------------------------------------------------
# distribution of intervals


@dataclass
class DistributionReport:
    h: list[int]
    nonempty: bool
    growth: list[bool]
    hypothesis_violation: bool

    @property
    def passed(self) -> bool:
        return self.nonempty and all(self.growth)

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "nonempty": self.nonempty,
            "growth": self.growth,
            "hypothesis_violation": self.hypothesis_violation,
            "verdict": "pass" if self.passed else "fail",
        }


def check_distribution(J_levels, T_levels, schedule: CantorSchedule) -> DistributionReport:
    """``h(n) = #(T_n ∩ J_n)``, non-emptiness and the growth ``h(n+1) >= (R_n/4) h(n)``."""
    J = _levels_of(J_levels)
    T = _levels_of(T_levels)
    depth = min(len(J), len(T))
    for n in range(depth):
        if J[n].root != T[n].root or J[n].scale != T[n].scale:
            raise MismatchedFrame(f"level {n} frames differ")
    h = [len(set(J[n].indices) & set(T[n].indices)) for n in range(depth)]
    growth = [h[n + 1] >= Fraction(schedule.R(n), 4) * h[n] for n in range(depth - 1)]
    nonempty = all(x >= 1 for x in h)
    violation = not nonempty and not check_condition13(schedule, max(depth - 1, 0)).passed
    return DistributionReport(h, nonempty, growth, violation)


def adversarial_family(J_levels, schedule: CantorSchedule, target: int | None = None) -> list[LevelCollection]:
    """A local (I, R, R - s) family ``T`` minimising ``#(T_target ∩ J_target)``.

    Every ``T`` interval keeps exactly ``ceil(s_n)`` children; the choice comes
    from an exact dynamic programme over the intervals of ``J``.
    """
    J = _levels_of(J_levels)
    target = len(J) - 1 if target is None else target
    local = LocalSchedule(schedule)
    keep = [math.ceil(local.s(n)) for n in range(target)]
    J_sets = [set(level.indices) for level in J]
    cost: list[dict[int, int]] = [dict() for _ in range(target + 1)]
    cost[target] = {idx: 1 for idx in J_sets[target]}
    for n in range(target - 1, -1, -1):
        R_n = schedule.R(n)
        for idx in J_sets[n]:
            child_costs = sorted(cost[n + 1].get(c, 0) for c in range(idx * R_n, (idx + 1) * R_n))
            cost[n][idx] = sum(child_costs[: keep[n]])
    root = J[0]
    T = [LevelCollection(0, root.root, 1, (0,), ())]
    for n in range(target):
        R_n = schedule.R(n)
        chosen = []
        parents = []
        for p, idx in enumerate(T[n].indices):
            children = list(range(idx * R_n, (idx + 1) * R_n))
            children.sort(key=lambda c: (cost[n + 1].get(c, 0), c in J_sets[n + 1], c))
            for c in sorted(children[: keep[n]]):
                chosen.append(c)
                parents.append(p)
        order = sorted(range(len(chosen)), key=lambda i: chosen[i])
        T.append(LevelCollection(n + 1, root.root, T[n].scale * R_n,
                                 tuple(chosen[i] for i in order), tuple(parents[i] for i in order)))
    return T
