"""Parameters of the two Littlewood instances: ``f``, ``F``, ``R_n``, budgets and constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from ..cantor_core import CantorSchedule
from ..rigor import (
    ClosedInterval,
    RationalEnclosure,
    Real,
    as_fraction,
    compare,
    exp_enclosure,
    floor_of_enclosure,
    fraction_from_json,
    fraction_to_json,
    log_enclosure,
    log_star_enclosure,
    log_star_of_enclosure,
)
from .dsequence import DSequence

__all__ = [
    "InstanceParams",
    "ParamsCertificate",
    "PROP1",
    "PROP2",
    "VARIANTS",
    "Variant",
    "big_F",
    "budget",
    "d_norm",
    "f_value",
    "height",
    "level_R",
    "littlewood_schedule",
    "validate_params",
]


def d_norm(q: int, D: DSequence) -> Fraction:
    """``|q|_D = 1 / D_k`` for the largest ``k`` with ``D_k | q``."""
    if q < 1:
        raise ValueError("d_norm needs q >= 1")
    return Fraction(1, D.D(D.valuation(q)))


def height(q: int, D: DSequence) -> int:
    """``H(q) = q^2 |q|_D``, an integer because ``D_k | q``."""
    if q < 1:
        raise ValueError("height needs q >= 1")
    return q * q // D.D(D.valuation(q))


def _ln_enclosure(q: int, eps: Fraction) -> RationalEnclosure:
    return log_enclosure(q, eps)


@dataclass(frozen=True)
class Variant:
    """One of the two instances; ``tag`` is ``"prop1"`` or ``"prop2"``."""

    tag: str

    def f(self, q: int, eps) -> RationalEnclosure:
        eps = as_fraction(eps)
        if q < 1:
            raise ValueError("f needs q >= 1")
        inner_eps = eps / 8
        while True:
            ln_q = _ln_enclosure(q, inner_eps)
            if self.tag == "prop1":
                value = log_star_enclosure(q, inner_eps) * log_star_of_enclosure(ln_q, inner_eps)
            else:
                a = log_star_of_enclosure(ln_q, inner_eps)
                value = a * log_star_of_enclosure(a, inner_eps)
            if value.width <= eps:
                return value
            inner_eps /= 16

    def F_factor(self, k: int) -> int:
        """The ``k``-th factor of ``F``: ``k [log* k]`` or ``[log* k log* log k]``."""
        if k < 1:
            return 1
        return _F_factor(self.tag, k)

    def budget_value(self, n: int, R: int, eps: Fraction) -> RationalEnclosure:
        eps = as_fraction(eps)
        inner = eps / (64 * (n * n + 1))
        while True:
            ln_R = log_enclosure(R, inner)
            ls_n = log_star_enclosure(n, inner)
            if self.tag == "prop1":
                value = 7 * ln_R * ln_R * (n * n) * ls_n * ls_n
            else:
                ln_n = RationalEnclosure.exact(0) if n <= 1 else log_enclosure(n, inner)
                ls_ln = log_star_of_enclosure(ln_n, inner)
                value = 7 * ln_R * ln_R * ls_n * ls_n * ls_ln * ls_ln
            if value.width <= eps:
                return value
            inner /= 16

    def f_lower_target(self, n: int, eps) -> RationalEnclosure:
        """``n (log* n)^2 / 2`` (first instance) or ``log* n log* log n`` (second)."""
        eps = as_fraction(eps)
        ls_n = log_star_enclosure(n, eps / 8)
        if self.tag == "prop1":
            return ls_n * ls_n * Fraction(n, 2)
        ln_n = RationalEnclosure.exact(0) if n <= 1 else log_enclosure(n, eps / 8)
        return ls_n * log_star_of_enclosure(ln_n, eps / 8)

    def describe(self) -> str:
        return self.tag


PROP1 = Variant("prop1")
PROP2 = Variant("prop2")
VARIANTS = {"prop1": PROP1, "prop2": PROP2}


@lru_cache(maxsize=None)
def _F_factor(tag: str, k: int) -> int:
    def enc(eps):
        ls = log_star_enclosure(k, eps / 4)
        if tag == "prop1":
            return ls
        ln_k = RationalEnclosure.exact(0) if k == 1 else log_enclosure(k, eps / 4)
        return ls * log_star_of_enclosure(ln_k, eps / 4)

    value = floor_of_enclosure(enc(Fraction(1, 1 << 40)), refine=enc)
    return k * value if tag == "prop1" else value


@lru_cache(maxsize=None)
def _big_F(tag: str, n: int) -> int:
    if n <= 0:
        return 1
    return _big_F(tag, n - 1) * _F_factor(tag, n)


def big_F(n: int, variant: Variant) -> int:
    """``F(n)``, with ``F(n) = 1`` for ``n <= 0``."""
    if n > 400:
        for m in range(0, n, 200):
            _big_F(variant.tag, m)
    return _big_F(variant.tag, n)


def level_R(n: int, R: int, variant: Variant) -> int:
    """``R_n = R F(n+1) / F(n)``."""
    if n < 0 or R < 2:
        raise ValueError("level_R needs n >= 0 and R >= 2")
    return R * variant.F_factor(n + 1)


def budget(n: int, R: int, variant: Variant) -> Real | Fraction:
    """Removal budget ``r_{n-1,n}`` (zero at ``n = 0``)."""
    if n <= 0:
        return Fraction(0)
    return Real(lambda eps: variant.budget_value(n, R, eps), label=f"budget[{variant.tag},{n}]")


def f_value(q: int, variant: Variant, eps) -> RationalEnclosure:
    return variant.f(q, eps)


# ---------------------------------------------------------------------------
# instance parameters


@dataclass(frozen=True)
class InstanceParams:
    R: int
    c1: Fraction
    c: Fraction
    variant: Variant
    D: DSequence
    root: ClosedInterval | None = None

    def __post_init__(self):
        object.__setattr__(self, "c1", as_fraction(self.c1))
        object.__setattr__(self, "c", as_fraction(self.c))
        if self.R < 2:
            raise ValueError("R must be at least 2")
        if self.c1 <= 0 or self.c <= 0:
            raise ValueError("c1 and c must be strictly positive")
        root = self.root or ClosedInterval(Fraction(0), self.c1)
        if root.length != self.c1:
            raise ValueError(f"root interval must have length c1 = {self.c1}")
        if root.left < 0 or root.right > 1:
            raise ValueError("root interval must lie in [0, 1]")
        object.__setattr__(self, "root", root)

    def R_n(self, n: int) -> int:
        return level_R(n, self.R, self.variant)

    def F(self, n: int) -> int:
        return big_F(n, self.variant)

    def scale(self, n: int) -> int:
        """Number of level-``n`` grid cells in the root: ``R^n F(n)``."""
        return self.R ** n * self.F(n)

    def level_length(self, n: int) -> Fraction:
        return self.c1 / self.scale(n)

    def height_range(self, n: int) -> tuple[int, int]:
        """``[R^{n-1} F(n-1), R^n F(n))``; empty for ``n = 0``."""
        if n <= 0:
            return (1, 1)
        return (self.R ** (n - 1) * self.F(n - 1), self.R ** n * self.F(n))

    def height_bound(self, depth: int) -> int:
        """Heights below this are excluded from every level-``depth`` interval."""
        if depth <= 0:
            return 0
        return self.R ** (depth - 1) * self.F(depth - 1)

    def budget(self, n: int):
        return budget(n, self.R, self.variant)

    def same_frame(self, other: "InstanceParams") -> bool:
        return (self.R, self.c1, self.root, self.variant) == (other.R, other.c1, other.root, other.variant)

    def to_json(self) -> dict:
        return {
            "R": self.R,
            "c1": fraction_to_json(self.c1),
            "c": fraction_to_json(self.c),
            "variant": self.variant.tag,
            "D": self.D.to_json(),
            "root": self.root.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "InstanceParams":
        return cls(
            int(obj["R"]),
            fraction_from_json(obj["c1"]),
            fraction_from_json(obj["c"]),
            VARIANTS[obj["variant"]],
            DSequence.from_json(obj["D"]),
            ClosedInterval.from_json(obj["root"]) if "root" in obj else None,
        )


def littlewood_schedule(params: InstanceParams) -> CantorSchedule:
    """The (I, R, r) schedule of an instance: budgets only at ``m = n - 1``."""

    def row(n):
        return {n - 1: params.budget(n)} if n >= 1 else {}

    return CantorSchedule(params.root, params.R_n, row, nondecreasing=True,
                          name=f"{params.variant.tag}/{params.D.describe()}/R={params.R}")


# ---------------------------------------------------------------------------
# constant validation


@dataclass
class InequalityCheck:
    name: str
    lhs: RationalEnclosure
    rhs: Fraction
    passed: bool

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs.to_json(),
            "lhs_approx": float(self.lhs.mid),
            "rhs": fraction_to_json(self.rhs),
            "margin_lower": float(self.rhs - self.lhs.hi),
            "passed": self.passed,
        }


@dataclass
class ParamsCertificate:
    checks: list[InequalityCheck]
    diagnostic_c4: RationalEnclosure
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(c.passed for c in self.checks)

    def check(self, name: str) -> InequalityCheck:
        return next(c for c in self.checks if c.name == name)

    def to_json(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "checks": [c.to_json() for c in self.checks],
            "diagnostic_c4": self.diagnostic_c4.to_json(),
        }

    def report(self) -> str:
        lines = [f"constants: {'pass' if self.passed else 'fail'}"]
        for c in self.checks:
            lines.append(f"  {c.name:<12s} lhs ~ {float(c.lhs.mid):.6g}  rhs {float(c.rhs):.6g}  "
                         f"{'ok' if c.passed else 'FAILS'}")
        lines.append(f"  c4 (diagnostic) ~ {float(self.diagnostic_c4.mid):.6g}")
        return "\n".join(lines)


def _c1_condition(R: int, c1: Fraction, eps: Fraction) -> RationalEnclosure:
    e2 = exp_enclosure(2, eps / 64)
    lnR = log_enclosure(R, eps / 64)
    ln2 = log_enclosure(2, eps / 64)
    return e2 * (2 * c1 * R) * (lnR + 2) / ln2


def _c_condition(R: int, c1: Fraction, c: Fraction, eps: Fraction) -> RationalEnclosure:
    e = exp_enclosure(1, eps / 64)
    lnR = log_enclosure(R, eps / (1 << 20))
    ln2 = log_enclosure(2, eps / (1 << 20))
    first = (lnR + 2) * (64 * R * R) / (ln2 * c1)
    second = e * (lnR + 2) * (lnR + 2) * (16 * R * R) / ln2
    return (first + second) * c


def validate_params(R: int, c1, c, variant: Variant | None = None) -> ParamsCertificate:
    """Decide ``R > e^12`` and the two smallness conditions on ``c1`` and ``c``."""
    c1, c = as_fraction(c1), as_fraction(c)
    if R < 2:
        raise ValueError("R must be at least 2")
    if c1 <= 0 or c <= 0:
        raise ValueError("c1 and c must be strictly positive")

    checks = []
    ln_r = Real(lambda eps: log_enclosure(R, eps), label="ln R")
    checks.append(InequalityCheck("R > e^12", ln_r.enclose(Fraction(1, 1 << 64)), Fraction(12),
                                  compare(ln_r, 12) > 0))
    lhs10 = Real(lambda eps: _c1_condition(R, c1, eps), label="c1 condition")
    checks.append(InequalityCheck("c1 condition", lhs10.enclose(Fraction(1, 1 << 64)), Fraction(1),
                                  compare(lhs10, 1) < 0))
    lhs11 = Real(lambda eps: _c_condition(R, c1, c, eps), label="c condition")
    checks.append(InequalityCheck("c condition", lhs11.enclose(Fraction(1, 1 << 64)), Fraction(1),
                                  compare(lhs11, 1) < 0))

    eps = Fraction(1, 1 << 64)
    e = exp_enclosure(1, eps)
    lnR = log_enclosure(R, eps)
    c4 = exp_enclosure(2, eps) * (2 * c1 * R) + 64 * c / c1 * R * R + (lnR + 2) * (e * (16 * c * R * R) + 4)
    return ParamsCertificate(checks, c4)
