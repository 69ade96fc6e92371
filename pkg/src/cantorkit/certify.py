"""Non-emptiness and dimension certificates for a :class:`CantorSchedule`.

Both certificates are evaluated in exact arithmetic when every budget is a
rational.  Budgets known only through enclosures are handled by rerunning the
whole evaluation at doubled precision until every sign is decided.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .cantor_core import CantorSchedule
from .rigor import (
    PRECISION_CAP_BITS,
    RationalEnclosure,
    Real,
    UndecidableComparison,
    enclose,
    fraction_to_json,
    log_enclosure,
)

__all__ = [
    "DegenerateRecursion",
    "DimensionBound",
    "DimensionCertificate",
    "NonEmptinessCertificate",
    "certify_nonempty",
    "check_condition13",
    "dimension_lower_bound",
    "t_sequence",
]

Value = Union[Fraction, RationalEnclosure]


class DegenerateRecursion(ArithmeticError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"t_{index} <= 0; later terms of the recursion are undefined")


def _exact_schedule(schedule: CantorSchedule, depth: int) -> bool:
    return all(not isinstance(v, Real) for n in range(depth) for v in schedule.budget_row(n).values())


def _value_json(v: Value) -> dict:
    if isinstance(v, RationalEnclosure):
        return v.to_json()
    return fraction_to_json(v)


def _precisions():
    bits = 48
    while bits < PRECISION_CAP_BITS:
        yield bits
        bits *= 2
    yield PRECISION_CAP_BITS


def _t_exact(schedule: CantorSchedule, depth: int) -> list[Fraction]:
    ts: list[Fraction] = []
    prefix = [Fraction(1)]  # prefix[j] = t_0 ... t_{j-1}
    for n in range(depth):
        row = schedule.budget_row(n)
        t = Fraction(schedule.R(n)) - row.get(n, Fraction(0))
        for m, r in row.items():
            if m < n:
                t -= r * prefix[m] / prefix[n]
        ts.append(t)
        if t <= 0:
            break
        prefix.append(prefix[-1] * t)
    return ts


def _t_enclosed(schedule: CantorSchedule, depth: int, bits: int) -> tuple[list[RationalEnclosure], bool]:
    """Enclosures of t_0.. at one working precision; second value False if a sign was undecided."""
    eps = Fraction(1, 1 << bits)
    ts: list[RationalEnclosure] = []
    for n in range(depth):
        row = schedule.budget_row(n)
        t = RationalEnclosure.exact(schedule.R(n)) - enclose(row.get(n, Fraction(0)), eps)
        for m, r in row.items():
            if m < n:
                prod = RationalEnclosure.exact(1)
                for j in range(m, n):
                    prod = (prod * ts[j]).rounded(bits + 32)
                t = t - enclose(r, eps) / prod
        t = t.rounded(bits + 32)
        ts.append(t)
        if t.hi <= 0:
            return ts, True
        if t.lo <= 0:
            return ts, False
    return ts, True


def t_sequence(schedule: CantorSchedule, depth: int, strict: bool = False) -> list[Value]:
    """``t_0, ..., t_{depth-1}``, stopping after the first term that is not positive.

    Exact rationals when all budgets are rational, otherwise enclosures.  With
    ``strict=True`` an early stop raises :class:`DegenerateRecursion`.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if _exact_schedule(schedule, depth):
        ts: list[Value] = list(_t_exact(schedule, depth))
    else:
        for bits in _precisions():
            ts, decided = _t_enclosed(schedule, depth, bits)
            if decided:
                break
        else:
            raise UndecidableComparison(f"sign of t_{len(ts) - 1} undecided at 2^-{PRECISION_CAP_BITS}")
    if strict and len(ts) < depth:
        raise DegenerateRecursion(len(ts) - 1)
    if strict and ts and _lo(ts[-1]) <= 0:
        raise DegenerateRecursion(len(ts) - 1)
    return ts


def _lo(v: Value) -> Fraction:
    return v.lo if isinstance(v, RationalEnclosure) else v


@dataclass
class NonEmptinessCertificate:
    t_values: list[Value]
    passed: bool
    first_failure: int | None
    survivor_lower_bounds: list[Fraction]
    depth: int

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        return {
            "kind": "nonempty",
            "depth": self.depth,
            "verdict": self.verdict,
            "first_failure": self.first_failure,
            "t_values": [_value_json(t) for t in self.t_values],
            "survivor_lower_bounds": [fraction_to_json(x) for x in self.survivor_lower_bounds],
        }

    def report(self) -> str:
        lines = [f"non-emptiness: {self.verdict} (depth {self.depth})", "  n        t_n              prod_{i<n} t_i"]
        for n, t in enumerate(self.t_values):
            bound = self.survivor_lower_bounds[n] if n < len(self.survivor_lower_bounds) else None
            lines.append(f"  {n:<6d} {float(t) if not isinstance(t, Fraction) else float(t):<16.8g} "
                         f"{'' if bound is None else f'{float(bound):.8g}'}")
        if self.first_failure is not None:
            lines.append(f"  first non-positive term at n = {self.first_failure}")
        return "\n".join(lines)


def certify_nonempty(schedule: CantorSchedule, depth: int) -> NonEmptinessCertificate:
    """Check ``t_n > 0`` for ``n < depth``; a pass bounds ``#J_n`` below by ``t_0 ... t_{n-1}``."""
    ts = t_sequence(schedule, depth)
    failure = next((i for i, t in enumerate(ts) if _lo(t) <= 0), None)
    bounds = [Fraction(1)]
    for t in ts:
        if _lo(t) <= 0:
            break
        bounds.append(bounds[-1] * _lo(t))
    return NonEmptinessCertificate(ts, failure is None and len(ts) == depth, failure, bounds, depth)


# ---------------------------------------------------------------------------
# the dimension condition


def _lhs_exact(schedule: CantorSchedule, n: int) -> Fraction:
    total = Fraction(0)
    for m, r in schedule.budget_row(n).items():
        prod = Fraction(1)
        for j in range(m, n):
            prod *= Fraction(4, schedule.R(j))
        total += r * prod
    return total


def _lhs_real(schedule: CantorSchedule, n: int) -> Real:
    row = schedule.budget_row(n)

    def fn(eps):
        total = RationalEnclosure.exact(0)
        for m, r in row.items():
            prod = Fraction(1)
            for j in range(m, n):
                prod *= Fraction(4, schedule.R(j))
            total = total + enclose(r, eps / (len(row) * max(prod, 1))) * prod
        return total

    return Real(fn, label=f"lhs13[{n}]")


@dataclass
class ConditionRow:
    n: int
    R: int
    lhs: Value
    rhs: Fraction
    ok: bool


@dataclass
class DimensionCertificate:
    rows: list[ConditionRow]
    passed: bool
    first_failure: int | None
    reason: str
    bound: "DimensionBound | None" = None
    depth: int = 0

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        return {
            "kind": "dimension",
            "depth": self.depth,
            "verdict": self.verdict,
            "first_failure": self.first_failure,
            "reason": self.reason,
            "levels": [
                {"n": r.n, "R": r.R, "lhs": _value_json(r.lhs), "rhs": fraction_to_json(r.rhs), "ok": r.ok}
                for r in self.rows
            ],
            "bound": None if self.bound is None else self.bound.to_json(),
        }

    def report(self) -> str:
        lines = [f"dimension condition: {self.verdict} (depth {self.depth}) {self.reason}".rstrip(),
                 "  n      R_n          lhs              R_n/4        ok"]
        for r in self.rows:
            lines.append(f"  {r.n:<6d} {r.R:<12d} {float(r.lhs):<16.8g} {float(r.rhs):<12.8g} {r.ok}")
        if self.bound is not None:
            lines.append(f"  lower bound on dimension: {self.bound.describe()}")
        return "\n".join(lines)


def check_condition13(schedule: CantorSchedule, depth: int) -> DimensionCertificate:
    """Check ``R_n >= 4`` and the weighted budget sum against ``R_n / 4`` for ``n < depth``."""
    rows: list[ConditionRow] = []
    failure = None
    reason = ""
    exact = _exact_schedule(schedule, depth)
    for n in range(depth):
        R = schedule.R(n)
        rhs = Fraction(R, 4)
        if exact:
            lhs: Value = _lhs_exact(schedule, n)
            ok = lhs <= rhs
        else:
            real = _lhs_real(schedule, n)
            from .rigor import compare

            ok = compare(real, rhs) <= 0
            lhs = real.enclose(Fraction(1, 1 << 48))
        if R < 4:
            ok = False
            reason = reason or f"R_{n} = {R} < 4"
        elif not ok:
            reason = reason or f"budget sum exceeds R_{n}/4 at n = {n}"
        rows.append(ConditionRow(n, R, lhs, rhs, ok))
        if not ok and failure is None:
            failure = n
    cert = DimensionCertificate(rows, failure is None, failure, reason, depth=depth)
    if cert.passed and depth > 0:
        cert.bound = _bound(schedule, depth)
    return cert


@dataclass
class DimensionBound:
    """Enclosure of ``min_{n < horizon} (1 - log 2 / log R_n)``.

    ``rigorous`` is True only when the branching sequence is known to be
    nondecreasing, in which case the minimum also bounds the liminf.
    """

    value: RationalEnclosure
    argmin: int
    rigorous: bool
    horizon: int

    def describe(self) -> str:
        tag = "lower bound for liminf" if self.rigorous else "empirical liminf"
        return f"{float(self.value.lo):.10g} .. {float(self.value.hi):.10g} ({tag}, horizon {self.horizon})"

    def to_json(self) -> dict:
        return {
            "value": self.value.to_json(),
            "argmin": self.argmin,
            "rigorous": self.rigorous,
            "label": "lower bound for liminf" if self.rigorous else "empirical liminf",
            "horizon": self.horizon,
        }


def _one_minus_log_r_2(R: int, eps: Fraction) -> RationalEnclosure:
    if R & (R - 1) == 0:
        return RationalEnclosure.exact(1 - Fraction(1, R.bit_length() - 1))
    ln2 = log_enclosure(2, eps / 4)
    lnR = log_enclosure(R, eps / 4)
    return 1 - ln2 / lnR


def _bound(schedule: CantorSchedule, horizon: int) -> DimensionBound:
    R_values = [schedule.R(n) for n in range(horizon)]
    argmin = min(range(horizon), key=lambda n: R_values[n])
    value = _one_minus_log_r_2(R_values[argmin], Fraction(1, 1 << 64))
    return DimensionBound(value, argmin, schedule.nondecreasing, horizon)


def dimension_lower_bound(schedule: CantorSchedule, horizon: int) -> DimensionBound:
    """Lower bound ``1 - log_{R_n} 2`` minimised over the horizon; requires the condition to pass."""
    cert = check_condition13(schedule, horizon)
    if not cert.passed:
        raise ValueError(f"dimension hypothesis fails: {cert.reason}")
    return cert.bound
