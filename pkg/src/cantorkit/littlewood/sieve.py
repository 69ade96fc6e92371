"""Candidate enumeration, exclusion intervals and level construction for the Littlewood instances.

Removal always uses the outer enclosure of each exclusion interval, so a cell
is discarded whenever its closure might meet the true interval.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Iterator, Sequence

from ..cantor_core import LevelCollection, MismatchedFrame, RemovalLedger
from ..rigor import (
    ClosedInterval,
    RationalEnclosure,
    compare,
    e_power_enclosure,
    enclose,
    floor_of_enclosure,
    fraction_from_json,
    fraction_to_json,
    log_enclosure,
)
from .instance import InstanceParams, validate_params

__all__ = [
    "BudgetViolation",
    "FullState",
    "InvalidParams",
    "NoSurvivor",
    "NodeCapExceeded",
    "RationalCandidate",
    "StepReport",
    "WitnessCertificate",
    "WitnessState",
    "build_full",
    "build_level",
    "delta_interval",
    "enumerate_candidates",
    "joint_witness",
    "kill_range",
    "stratum_of",
    "witness",
]

F_EPS = Fraction(1, 1 << 64)
DEFAULT_NODE_CAP = 10 ** 7


class NoSurvivor(Exception):
    def __init__(self, level: int, parent: int, candidates):
        self.level, self.parent, self.candidates = level, parent, list(candidates)
        super().__init__(f"every child of level-{level - 1} interval #{parent} was removed "
                         f"({len(self.candidates)} candidates involved)")


class BudgetViolation(Exception):
    def __init__(self, n: int, ancestor: int, count: int, budget):
        self.n, self.ancestor, self.count, self.budget = n, ancestor, count, budget
        super().__init__(f"step {n}: {count} removals inside level-{n - 1} interval #{ancestor} "
                         f"exceed the budget {budget}")


class NodeCapExceeded(RuntimeError):
    pass


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class RationalCandidate:
    r: int
    q: int
    k: int
    qbar: int
    height: int
    stratum: int

    @property
    def point(self) -> Fraction:
        return Fraction(self.r, self.q)


def stratum_of(H: int, n: int, params: InstanceParams) -> int:
    """``l`` with ``e^l B <= H < e^(l+1) B`` where ``B = R^(n-1) F(n-1)``."""
    base = params.height_range(n)[0]
    x = Fraction(H, base)
    if x < 1:
        raise ValueError("height below the level's range")
    if x == 1:
        return 0
    return floor_of_enclosure(log_enclosure(x, Fraction(1, 1 << 40)), refine=lambda eps: log_enclosure(x, eps))


class _Strata:
    """Integer thresholds bracketing ``e^l B`` so most heights are classified without logs."""

    def __init__(self, n: int, params: InstanceParams):
        self.n, self.params = n, params
        base, top = params.height_range(n)
        self.bounds = []  # (A_l, B_l): H < A_l means below e^l B, H >= B_l means above
        l = 1
        while True:
            e_l = e_power_enclosure(l)
            A = math.ceil(e_l.lo * base)
            B = math.floor(e_l.hi * base) + 1
            self.bounds.append((A, B))
            if A >= top:
                break
            l += 1

    def __call__(self, H: int) -> int:
        l = 0
        for A, B in self.bounds:
            if H >= B:
                l += 1
            elif H < A:
                return l
            else:
                return stratum_of(H, self.n, self.params)
        return l


class _FCache:
    """Per-run cache of ``f`` enclosures keyed by ``q``."""

    def __init__(self, params: InstanceParams):
        self.params = params
        self.values: dict[int, RationalEnclosure] = {}

    def __call__(self, q: int) -> RationalEnclosure:
        v = self.values.get(q)
        if v is None:
            v = self.params.variant.f(q, F_EPS)
            self.values[q] = v
        return v


def _radius(params: InstanceParams, f: RationalEnclosure, H: int, rounding: str) -> Fraction:
    if rounding == "outer":
        return params.c / (f.lo * H)
    if rounding == "inner":
        return params.c / (f.hi * H)
    raise ValueError("rounding must be 'outer' or 'inner'")


def delta_interval(cand: RationalCandidate, params: InstanceParams, rounding: str = "outer",
                   eps: Fraction = F_EPS) -> ClosedInterval:
    """Exclusion interval around ``r/q``; outer contains the true one, inner is contained in it."""
    f = params.variant.f(cand.q, eps)
    rho = _radius(params, f, cand.height, rounding)
    x = Fraction(cand.r, cand.q)
    return ClosedInterval(x - rho, x + rho)


def _q_strata(n: int, params: InstanceParams) -> Iterator[tuple[int, int, int, int, int]]:
    """``(k, D_k, d_{k+1}, qbar_min, qbar_max)`` covering the heights of level ``n``."""
    lo_H, hi_H = params.height_range(n)
    if hi_H <= lo_H:
        return
    D = params.D
    k = 0
    while D.D(k) < hi_H:
        Dk = D.D(k)
        need_lo = -(-lo_H // Dk)  # ceil
        qmin = isqrt(need_lo - 1) + 1 if need_lo > 1 else 1
        qmax = isqrt(-(-hi_H // Dk) - 1)
        if qmin <= qmax:
            yield k, Dk, D.d(k + 1), qmin, qmax
        k += 1


def _window_integers(window: ClosedInterval) -> tuple[int, int, int]:
    W = math.lcm(window.left.denominator, window.right.denominator)
    return window.left.numerator * (W // window.left.denominator), \
        window.right.numerator * (W // window.right.denominator), W


def enumerate_candidates(n: int, window: ClosedInterval, params: InstanceParams,
                         fcache: _FCache | None = None) -> Iterator[RationalCandidate]:
    """Every ``r/q`` with height in level ``n``'s range whose outer interval meets ``window``.

    Candidates come in order of ``k``, then ``qbar``, then ``r``.
    """
    if n < 1:
        return
    fcache = fcache or _FCache(params)
    strata = _Strata(n, params)
    A, B, W = _window_integers(window)
    cn, cd = params.c.numerator, params.c.denominator
    for k, Dk, d_next, qmin, qmax in _q_strata(n, params):
        for qbar in range(qmin, qmax + 1):
            if qbar % d_next == 0:
                continue
            q = Dk * qbar
            # with f >= 1 the radius is at most c/H, i.e. q * radius <= c / qbar
            den = W * cd * qbar
            r_lo = -((-(q * A * cd * qbar - cn * W)) // den)
            r_hi = (q * B * cd * qbar + cn * W) // den
            if r_lo > r_hi:
                continue
            H = Dk * qbar * qbar
            for r in range(r_lo, r_hi + 1):
                if r * W < A * q:
                    gap = Fraction(A * q - r * W, q * W)
                elif r * W > B * q:
                    gap = Fraction(r * W - B * q, q * W)
                else:
                    gap = 0
                if gap and gap > _radius(params, fcache(q), H, "outer"):
                    continue
                yield RationalCandidate(r, q, k, qbar, H, strata(H))


class _Grid:
    """Integer helpers for the level-``level`` cells ``[L + j delta, L + (j+1) delta]``."""

    def __init__(self, params: InstanceParams, level: int):
        K = Fraction(params.scale(level)) / params.c1
        L = params.root.left
        self.Kn, self.Kd = K.numerator, K.denominator
        self.Ln, self.Ld = L.numerator, L.denominator

    def cells(self, r: int, q: int, rho_n: int, rho_d: int) -> tuple[int, int]:
        """Inclusive cell range met by ``[r/q - rho, r/q + rho]`` with ``rho = rho_n / rho_d``."""
        centre = (r * self.Ld - self.Ln * q) * rho_d
        spread = rho_n * q * self.Ld
        den = q * self.Ld * rho_d * self.Kd
        lo_num = (centre - spread) * self.Kn
        hi_num = (centre + spread) * self.Kn
        return -((-lo_num) // den) - 1, hi_num // den


def kill_range(cand: RationalCandidate, params: InstanceParams, level: int,
               fcache: _FCache | None = None, grid: _Grid | None = None) -> tuple[int, int]:
    """Inclusive range of level-``level`` grid cells whose closure meets the outer interval."""
    grid = grid or _Grid(params, level)
    point = grid.cells(cand.r, cand.q, 0, 1)
    cap = grid.cells(cand.r, cand.q, params.c.numerator, params.c.denominator * cand.height)
    if cap == point:
        return point
    fcache = fcache or _FCache(params)
    rho = _radius(params, fcache(cand.q), cand.height, "outer")
    return grid.cells(cand.r, cand.q, rho.numerator, rho.denominator)


def _merge(ranges: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Merge inclusive ranges."""
    out: list[tuple[int, int]] = []
    for lo, hi in sorted(ranges):
        if out and lo <= out[-1][1] + 1:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def _clip(ranges, lo: int, hi: int) -> list[tuple[int, int]]:
    return [(max(a, lo), min(b, hi)) for a, b in ranges if b >= lo and a <= hi]


def _subtract(ranges, holes) -> list[tuple[int, int]]:
    """``ranges`` minus ``holes`` (both merged, inclusive)."""
    out = []
    for a, b in ranges:
        start = a
        for h0, h1 in holes:
            if h1 < start or h0 > b:
                continue
            if h0 > start:
                out.append((start, h0 - 1))
            start = max(start, h1 + 1)
            if start > b:
                break
        if start <= b:
            out.append((start, b))
    return out


def _size(ranges) -> int:
    return sum(b - a + 1 for a, b in ranges)


# ---------------------------------------------------------------------------
# witness mode


@dataclass
class StepReport:
    """Diagnostics for one witness step ``n -> n + 1``."""

    n: int
    ancestor: int
    candidates: list[int]
    kills: list[int]
    combined_kills: int
    budgets: list[float]
    within_budget: bool
    by_stratum: list[dict] = field(default_factory=list)
    max_kill_per_candidate: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ancestor": self.ancestor,
            "candidates": self.candidates,
            "kills": self.kills,
            "combined_kills": self.combined_kills,
            "budgets": self.budgets,
            "within_budget": self.within_budget,
            "by_stratum": self.by_stratum,
            "max_kill_per_candidate": self.max_kill_per_candidate,
        }


@dataclass
class WitnessState:
    """Active chain ``J_0 ⊃ ... ⊃ J_n`` plus the removed level-``n`` cells inside ``J_{n-1}``.

    ``dead`` holds merged inclusive index ranges at level ``n``.
    """

    params: list[InstanceParams]
    chain: list[int]
    dead: list[tuple[int, int]] = field(default_factory=list)

    @property
    def level(self) -> int:
        return len(self.chain) - 1


def _check_frame(params: Sequence[InstanceParams]):
    if not params:
        raise ValueError("need at least one instance")
    for p in params[1:]:
        if not params[0].same_frame(p):
            raise MismatchedFrame("instances must share R, c1, the root and the variant")


def _witness_step(state: WitnessState, certified: bool) -> tuple[WitnessState, RemovalLedger, StepReport]:
    params = state.params
    base = params[0]
    n = state.level
    R_n = base.R_n(n)
    if n == 0:
        new = WitnessState(params, state.chain + [0], [])
        return new, RemovalLedger(0), StepReport(0, 0, [0] * len(params), [0] * len(params), 0,
                                                 [0.0] * len(params), True)
    a = state.chain[n - 1]
    R_prev = base.R_n(n - 1)
    window = ClosedInterval(base.root.left + a * base.level_length(n - 1),
                            base.root.left + (a + 1) * base.level_length(n - 1))
    lo, hi = a * R_prev * R_n, (a + 1) * R_prev * R_n - 1
    holes = _merge([(x * R_n, (y + 1) * R_n - 1) for x, y in state.dead])

    all_ranges: list[tuple[int, int]] = []
    per_instance_kills = []
    per_instance_cands = []
    strata_rows = []
    max_kill = []
    offenders = []
    for p in params:
        fcache = _FCache(p)
        ranges = []
        by_kl: dict[tuple[int, int], list] = defaultdict(lambda: [0, [], set()])
        biggest = 0
        count = 0
        grid = _Grid(p, n + 1)
        for cand in enumerate_candidates(n, window, p, fcache):
            count += 1
            rng = kill_range(cand, p, n + 1, fcache, grid)
            clipped = _clip([rng], lo, hi)
            ranges.extend(clipped)
            by_kl[(cand.k, cand.stratum)][0] += 1
            by_kl[(cand.k, cand.stratum)][1].extend(clipped)
            g = math.gcd(cand.r, cand.q)
            by_kl[(cand.k, cand.stratum)][2].add((cand.r // g, cand.q // g))
            biggest = max(biggest, rng[1] - rng[0] + 1)
            if clipped:
                offenders.append(cand)
        merged = _subtract(_merge(ranges), holes)
        per_instance_kills.append(_size(merged))
        per_instance_cands.append(count)
        strata_rows.append([
            {"k": k, "l": l, "candidates": v[0], "points": len(v[2]),
             "kills": _size(_subtract(_merge(v[1]), holes))}
            for (k, l), v in sorted(by_kl.items())
        ])
        max_kill.append(biggest)
        all_ranges.extend(ranges)

    killed = _subtract(_merge(all_ranges), holes)
    combined = _size(killed)
    budgets = [p.budget(n) for p in params]
    ok_each = [compare(kc, b) <= 0 for kc, b in zip(per_instance_kills, budgets)]
    total_budget = sum(enclose(b, Fraction(1, 1 << 40)).hi for b in budgets)
    ok_joint = all(ok_each) and compare(combined, _budget_sum(budgets)) <= 0
    if certified and not ok_joint:
        raise BudgetViolation(n, a, combined, float(total_budget))

    removed = []
    if combined <= 10 ** 6:
        for x, y in killed:
            removed.extend(range(x, y + 1))
    ledger = RemovalLedger(n, {(n - 1, a): combined}, tuple(removed))

    b = state.chain[n]
    kids = (b * R_n, (b + 1) * R_n - 1)
    kids_dead = _clip(killed, *kids)
    survivor = kids[0]
    for x, y in kids_dead:
        if x <= survivor <= y:
            survivor = y + 1
    if survivor > kids[1]:
        raise NoSurvivor(n + 1, b, offenders)
    report = StepReport(
        n, a, per_instance_cands, per_instance_kills, combined,
        [float(enclose(b_, Fraction(1, 1 << 30)).mid) for b_ in budgets], ok_joint,
        strata_rows, max_kill,
    )
    return WitnessState(params, state.chain + [survivor], kids_dead), ledger, report


def _budget_sum(budgets):
    from ..cantor_core import _sum_budgets

    return _sum_budgets(budgets)


@dataclass
class WitnessCertificate:
    """A nested chain ``J_0 ⊃ ... ⊃ J_N`` for one instance, with per-step removal ledgers.

    Every point of ``J_N`` avoids the exclusion intervals of all ``r/q`` with
    height below ``height_bound``.
    """

    params: InstanceParams
    chain: list[ClosedInterval]
    chain_indices: list[int]
    ledgers: list[RemovalLedger]
    height_bound: int
    certified: bool
    steps: list[StepReport] = field(default_factory=list)
    joint_with: list[InstanceParams] = field(default_factory=list)
    position: int = 0  # column of this instance in the shared step reports

    @property
    def depth(self) -> int:
        return len(self.chain) - 1

    @property
    def final(self) -> ClosedInterval:
        return self.chain[-1]

    def to_json(self) -> dict:
        return {
            "kind": "littlewood-witness",
            "params": self.params.to_json(),
            "depth": self.depth,
            "chain": [iv.to_json() for iv in self.chain],
            "chain_indices": [str(i) for i in self.chain_indices],
            "ledgers": [
                {"n": lg.n, "counts": [{"m": m, "ancestor": str(a), "count": c}
                                       for (m, a), c in sorted(lg.counts.items())]}
                for lg in self.ledgers
            ],
            "height_bound": fraction_to_json(Fraction(self.height_bound)),
            "certified": self.certified,
            "steps": [s.to_json() for s in self.steps],
            "joint_with": [p.to_json() for p in self.joint_with],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WitnessCertificate":
        ledgers = []
        for lg in obj.get("ledgers", []):
            counts = {(int(c["m"]), int(c["ancestor"])): int(c["count"]) for c in lg["counts"]}
            ledgers.append(RemovalLedger(int(lg["n"]), counts))
        bound = fraction_from_json(obj["height_bound"])
        if bound.denominator != 1:
            raise ValueError("height bound must be an integer")
        return cls(
            InstanceParams.from_json(obj["params"]),
            [ClosedInterval.from_json(x) for x in obj["chain"]],
            [int(i) for i in obj.get("chain_indices", [])],
            ledgers,
            int(bound),
            bool(obj.get("certified", False)),
            [],
            [InstanceParams.from_json(p) for p in obj.get("joint_with", [])],
        )


def _resolve_certified(params: Sequence[InstanceParams], uncertified: bool) -> bool:
    ok = all(validate_params(p.R, p.c1, p.c, p.variant).passed for p in params)
    if not ok and not uncertified:
        raise InvalidParams("constants fail validation; use uncertified mode for experimental runs")
    return ok


def joint_witness(params: Sequence[InstanceParams], depth: int, *,
                  uncertified: bool = False) -> list[WitnessCertificate]:
    """One shared chain avoiding the exclusion intervals of every instance.

    Removals are the union over instances; each step's count is checked
    against the summed budget.  Returns one certificate per instance.
    """
    params = list(params)
    _check_frame(params)
    if depth < 0:
        raise ValueError("depth must be non-negative")
    certified = _resolve_certified(params, uncertified)
    state = WitnessState(params, [0])
    ledgers, steps = [], []
    for _ in range(depth):
        state, ledger, report = _witness_step(state, certified)
        ledgers.append(ledger)
        steps.append(report)
    base = params[0]
    chain = []
    for m, idx in enumerate(state.chain):
        step = base.level_length(m)
        chain.append(ClosedInterval(base.root.left + idx * step, base.root.left + (idx + 1) * step))
    bound = base.height_bound(depth)
    return [
        WitnessCertificate(p, chain, list(state.chain), ledgers, bound, certified, steps,
                           [o for o in params if o is not p], i)
        for i, p in enumerate(params)
    ]


def witness(params: InstanceParams, depth: int, *, uncertified: bool = False) -> WitnessCertificate:
    """Build a certified chain to ``depth`` by following the leftmost surviving child."""
    return joint_witness([params], depth, uncertified=uncertified)[0]


# ---------------------------------------------------------------------------
# full mode


@dataclass
class FullState:
    params: InstanceParams
    levels: list[LevelCollection]


def build_full(params: InstanceParams, depth: int, *, node_cap: int = DEFAULT_NODE_CAP,
               uncertified: bool = False) -> tuple[list[LevelCollection], list[RemovalLedger]]:
    """Every survivor at every level up to ``depth``."""
    certified = _resolve_certified([params], uncertified)
    state = FullState(params, [LevelCollection(0, params.root, 1, (0,), ())])
    ledgers = []
    for _ in range(depth):
        state, ledger = _full_step(state, certified, node_cap)
        ledgers.append(ledger)
        if not state.levels[-1].indices:
            break
    return state.levels, ledgers


def _full_step(state: FullState, certified: bool, node_cap: int) -> tuple[FullState, RemovalLedger]:
    p = state.params
    current = state.levels[-1]
    n = current.level
    R_n = p.R_n(n)
    if len(current) * R_n > node_cap:
        raise NodeCapExceeded(f"level {n + 1} would hold {len(current) * R_n} candidates (cap {node_cap})")
    indices = []
    parents = []
    for pos, idx in enumerate(current.indices):
        indices.extend(range(idx * R_n, (idx + 1) * R_n))
        parents.extend([pos] * R_n)
    remove: set[int] = set()
    if n >= 1:
        fcache = _FCache(p)
        grid = _Grid(p, n + 1)
        for cand in enumerate_candidates(n, p.root, p, fcache):
            lo, hi = kill_range(cand, p, n + 1, fcache, grid)
            i0 = bisect_left(indices, lo)
            i1 = bisect_right(indices, hi)
            remove.update(range(i0, i1))
    counts: Counter = Counter()
    if n >= 1:
        group = p.R_n(n - 1) * R_n
        for i in remove:
            counts[(n - 1, indices[i] // group)] += 1
        bud = p.budget(n)
        for (m, a), cnt in sorted(counts.items()):
            if compare(cnt, bud) > 0 and certified:
                raise BudgetViolation(n, a, cnt, float(enclose(bud, Fraction(1, 1 << 30)).mid))
    keep = [i for i in range(len(indices)) if i not in remove]
    nxt = LevelCollection(n + 1, p.root, current.scale * R_n,
                          tuple(indices[i] for i in keep), tuple(parents[i] for i in keep))
    ledger = RemovalLedger(n, dict(counts), tuple(sorted(indices[i] for i in remove)))
    return FullState(p, state.levels + [nxt]), ledger


def build_level(state, mode: str = "witness", *, certified: bool = True,
                node_cap: int = DEFAULT_NODE_CAP):
    """Advance a :class:`WitnessState` or :class:`FullState` by one level.

    Returns ``(next state, RemovalLedger)``.
    """
    if mode == "witness":
        if not isinstance(state, WitnessState):
            raise TypeError("witness mode needs a WitnessState")
        nxt, ledger, _ = _witness_step(state, certified)
        return nxt, ledger
    if mode == "full":
        if not isinstance(state, FullState):
            raise TypeError("full mode needs a FullState")
        return _full_step(state, certified, node_cap)
    raise ValueError("mode must be 'witness' or 'full'")
