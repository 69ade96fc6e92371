"""Exact rationals and rigorous two-sided enclosures.

Every real quantity the engine compares is either an exact
:class:`fractions.Fraction` or a :class:`RationalEnclosure` ``[lo, hi]``
guaranteed to contain it.  Logarithms and exponentials are evaluated with
fixed-point series under directed rounding (floor for the lower chain, ceil
for the upper chain), so the returned bounds are never the result of a
floating-point guess.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Union

__all__ = [
    "ClosedInterval",
    "DomainError",
    "PRECISION_CAP_BITS",
    "RationalEnclosure",
    "Real",
    "UndecidableComparison",
    "UndecidableFloor",
    "as_fraction",
    "compare",
    "decide_sign",
    "e_enclosure",
    "e_power_enclosure",
    "enclose",
    "exp_enclosure",
    "floor_of_enclosure",
    "fraction_from_json",
    "fraction_to_json",
    "log_enclosure",
    "log_star",
    "log_star_enclosure",
    "log_star_of_enclosure",
]

PRECISION_CAP_BITS = int(os.environ.get("CANTORKIT_PRECISION_BITS", "256"))

Number = Union[int, Fraction]


class DomainError(ValueError):
    pass


class UndecidableComparison(ArithmeticError):
    """Raised when an enclosure still straddles the comparison point at the cap."""


class UndecidableFloor(ArithmeticError):
    pass


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def parse_rational(text: str) -> Fraction:
    """Parse ``"3/4"``, ``"0.125"``, ``"-7"`` or a power form like ``"2^-27"``."""
    s = text.strip().replace("**", "^")
    if "^" in s:
        base, _, expo = s.partition("^")
        return Fraction(base) ** int(expo)
    return Fraction(s)


def fraction_to_json(x: Fraction) -> dict:
    x = as_fraction(x)
    return {"num": str(x.numerator), "den": str(x.denominator)}


def fraction_from_json(obj) -> Fraction:
    if isinstance(obj, dict):
        return Fraction(int(obj["num"]), int(obj["den"]))
    if isinstance(obj, (int, str)):
        return as_fraction(obj)
    raise ValueError(f"cannot read a rational from {obj!r}")


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _bits_of(eps: Fraction) -> int:
    """Number of binary digits needed to resolve ``eps``."""
    return max(1, eps.denominator.bit_length() - eps.numerator.bit_length() + 1)


def _round_down(x: Fraction, bits: int) -> Fraction:
    """Largest dyadic with ``bits`` significant bits that is <= x."""
    if x == 0:
        return x
    shift = bits - (abs(x.numerator).bit_length() - x.denominator.bit_length())
    if shift <= 0:
        return x if x.denominator == 1 else Fraction(math.floor(x))
    return Fraction(math.floor(x * (1 << shift)), 1 << shift)


def _round_up(x: Fraction, bits: int) -> Fraction:
    return -_round_down(-x, bits)


@dataclass(frozen=True)
class RationalEnclosure:
    """Closed rational bounds ``lo <= value <= hi``."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty enclosure [{self.lo}, {self.hi}]")

    @classmethod
    def exact(cls, x) -> "RationalEnclosure":
        x = as_fraction(x)
        return cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def hull(self, other: "RationalEnclosure") -> "RationalEnclosure":
        return RationalEnclosure(min(self.lo, other.lo), max(self.hi, other.hi))

    def rounded(self, bits: int) -> "RationalEnclosure":
        """Outward rounding of both endpoints to ``bits`` significant bits."""
        return RationalEnclosure(_round_down(self.lo, bits), _round_up(self.hi, bits))

    def __float__(self) -> float:
        return float(self.mid)

    @staticmethod
    def _wrap(other) -> "RationalEnclosure":
        if isinstance(other, RationalEnclosure):
            return other
        return RationalEnclosure.exact(other)

    def __add__(self, other):
        o = self._wrap(other)
        return RationalEnclosure(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return RationalEnclosure(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) - self

    def __mul__(self, other):
        o = self._wrap(other)
        products = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return RationalEnclosure(min(products), max(products))

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalEnclosure":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError(f"enclosure [{self.lo}, {self.hi}] contains zero")
        return RationalEnclosure(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        return self * self._wrap(other).reciprocal()

    def __rtruediv__(self, other):
        return self._wrap(other) * self.reciprocal()

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        if k % 2 == 1 or self.lo >= 0:
            return RationalEnclosure(self.lo**k, self.hi**k)
        if self.hi <= 0:
            return RationalEnclosure(self.hi**k, self.lo**k)
        return RationalEnclosure(Fraction(0), max(-self.lo, self.hi) ** k)

    def max_with(self, x) -> "RationalEnclosure":
        return RationalEnclosure(max(self.lo, x), max(self.hi, x))

    def to_json(self) -> dict:
        return {"lo": fraction_to_json(self.lo), "hi": fraction_to_json(self.hi)}

    @classmethod
    def from_json(cls, obj) -> "RationalEnclosure":
        return cls(fraction_from_json(obj["lo"]), fraction_from_json(obj["hi"]))

    def __repr__(self):
        return f"RationalEnclosure(~{float(self.lo):.12g}, ~{float(self.hi):.12g})"


@dataclass(frozen=True, order=True)
class ClosedInterval:
    left: Fraction
    right: Fraction

    def __post_init__(self):
        object.__setattr__(self, "left", as_fraction(self.left))
        object.__setattr__(self, "right", as_fraction(self.right))
        if self.left > self.right:
            raise ValueError(f"left endpoint {self.left} exceeds right endpoint {self.right}")

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def meets(self, other: "ClosedInterval") -> bool:
        """Closed-set intersection; shared endpoints count."""
        return self.left <= other.right and other.left <= self.right

    def contains(self, other: "ClosedInterval") -> bool:
        return self.left <= other.left and other.right <= self.right

    def to_json(self) -> dict:
        return {"left": fraction_to_json(self.left), "right": fraction_to_json(self.right)}

    @classmethod
    def from_json(cls, obj) -> "ClosedInterval":
        return cls(fraction_from_json(obj["left"]), fraction_from_json(obj["right"]))


class Real:
    """A real number known through an enclosure oracle ``eps -> RationalEnclosure``.

    Enclosures are cached; asking for a looser one reuses the tightest so far.
    """

    __slots__ = ("_fn", "label", "_best")

    def __init__(self, fn: Callable[[Fraction], RationalEnclosure], label: str = ""):
        self._fn = fn
        self.label = label
        self._best: RationalEnclosure | None = None

    def enclose(self, eps) -> RationalEnclosure:
        eps = as_fraction(eps)
        if self._best is not None and self._best.width <= eps:
            return self._best
        enc = self._fn(eps)
        if self._best is not None and self._best.width < enc.width:
            return self._best
        self._best = enc
        return enc

    def __repr__(self):
        enc = self._best
        approx = "?" if enc is None else f"~{float(enc.mid):.10g}"
        return f"Real({self.label or 'anon'} {approx})"


def enclose(value, eps) -> RationalEnclosure:
    """Enclosure of an exact number, a :class:`Real`, or an enclosure (returned as is)."""
    if isinstance(value, RationalEnclosure):
        return value
    if isinstance(value, Real):
        return value.enclose(eps)
    return RationalEnclosure.exact(value)


def _eps_schedule(cap_bits: int):
    bits = 24
    while bits < cap_bits:
        yield bits
        bits *= 2
    yield cap_bits


def decide_sign(fn: Callable[[Fraction], RationalEnclosure], cap_bits: int | None = None) -> int:
    """Sign of a real given by ``fn(eps)``, refined until decided.

    Returns 0 only when the enclosure collapses to exactly zero.
    """
    cap = PRECISION_CAP_BITS if cap_bits is None else cap_bits
    enc = None
    for bits in _eps_schedule(cap):
        enc = fn(Fraction(1, 1 << bits))
        if enc.lo > 0:
            return 1
        if enc.hi < 0:
            return -1
        if enc.lo == enc.hi == 0:
            return 0
    raise UndecidableComparison(f"sign undecided at 2^-{cap}: {enc!r}")


def compare(a, b, cap_bits: int | None = None) -> int:
    """Three-way comparison of numbers, enclosures-backed :class:`Real` values, or mixes."""
    if not isinstance(a, Real) and not isinstance(b, Real):
        a, b = as_fraction(a), as_fraction(b)
        return (a > b) - (a < b)
    return decide_sign(lambda eps: enclose(a, eps / 2) - enclose(b, eps / 2), cap_bits)


# ---------------------------------------------------------------------------
# fixed-point series


def _atanh_fixed(num: int, den: int, prec: int) -> tuple[int, int]:
    """Bounds ``lo, hi`` with ``lo/2^prec <= atanh(num/den) <= hi/2^prec``.

    Requires ``0 <= num/den < 1``.
    """
    if num == 0:
        return 0, 0
    one = 1 << prec
    zl = (num << prec) // den
    zh = _ceil_div(num << prec, den)
    z2l = (zl * zl) >> prec
    z2h = _ceil_div(zh * zh, one)
    pl, ph = zl, zh
    sl = sh = 0
    j = 0
    tail_num = den * den
    tail_den = den * den - num * num
    while True:
        sl += pl // (2 * j + 1)
        sh += _ceil_div(ph, 2 * j + 1)
        pl = (pl * z2l) >> prec
        ph = _ceil_div(ph * z2h, one)
        j += 1
        if ph <= 4:
            # remaining terms sum to at most p_j/(2j+1) * 1/(1-z^2)
            sh += _ceil_div(ph * tail_num, tail_den * (2 * j + 1)) + 1
            return sl, sh


@lru_cache(maxsize=64)
def _ln2_fixed(prec: int) -> tuple[int, int]:
    lo, hi = _atanh_fixed(1, 3, prec)
    return 2 * lo, 2 * hi


def _log_fixed(x: Fraction, prec: int) -> tuple[int, int]:
    a, b = x.numerator, x.denominator
    k = a.bit_length() - b.bit_length()
    # m = x / 2^k, moved into [2/3, 4/3]
    if k >= 0:
        A, B = a, b << k
    else:
        A, B = a << -k, b
    if 3 * A > 4 * B:
        B <<= 1
        k += 1
    elif 3 * A < 2 * B:
        A <<= 1
        k -= 1
    num, den = A - B, A + B
    tl, th = _atanh_fixed(abs(num), den, prec)
    if num < 0:
        tl, th = -th, -tl
    l2l, l2h = _ln2_fixed(prec)
    if k >= 0:
        return k * l2l + 2 * tl, k * l2h + 2 * th
    return k * l2h + 2 * tl, k * l2l + 2 * th


def log_enclosure(x, eps) -> RationalEnclosure:
    """Enclosure of ``ln x`` of width at most ``eps``; exact for ``x = 1``."""
    x, eps = as_fraction(x), as_fraction(eps)
    if x <= 0:
        raise DomainError(f"log of non-positive value {x}")
    if eps <= 0:
        raise DomainError("eps must be positive")
    if x == 1:
        return RationalEnclosure.exact(0)
    k = abs(x.numerator.bit_length() - x.denominator.bit_length()) + 2
    prec = max(32, _bits_of(eps) + k.bit_length() + 8)
    while True:
        lo, hi = _log_fixed(x, prec)
        enc = RationalEnclosure(Fraction(lo, 1 << prec), Fraction(hi, 1 << prec))
        if enc.width <= eps:
            return enc
        prec *= 2


def log_star(x) -> Real | Fraction:
    """The modified logarithm as a lazily refined real (exact ``1`` when ln x < 1 is decided)."""
    x = as_fraction(x)
    if x <= 0:
        return Fraction(1)
    enc = log_enclosure(x, Fraction(1, 1 << 24))
    if enc.hi < 1:
        return Fraction(1)
    return Real(lambda eps: log_star_enclosure(x, eps), label=f"log*({x})")


def log_star_enclosure(x, eps) -> RationalEnclosure:
    """Enclosure of ``log* x`` (1 below e, ln x from e on).

    ``log* x = max(1, ln x)``, so no separate comparison with e is needed and the
    result is automatically the hull of both branches when ln x is close to 1.
    """
    x = as_fraction(x)
    if x < 0:
        raise DomainError(f"log* of negative value {x}")
    if x == 0:
        return RationalEnclosure.exact(1)
    return log_enclosure(x, eps).max_with(Fraction(1))


def log_star_of_enclosure(v: RationalEnclosure, eps) -> RationalEnclosure:
    """``log*`` applied to every point of ``v``; uses that log* is nondecreasing."""
    eps = as_fraction(eps)
    lo = Fraction(1) if v.lo <= 0 else log_enclosure(v.lo, eps / 2).lo
    hi = Fraction(1) if v.hi <= 0 else log_enclosure(v.hi, eps / 2).hi
    return RationalEnclosure(max(Fraction(1), lo), max(Fraction(1), hi))


def _exp_small_fixed(x: Fraction, prec: int) -> tuple[int, int]:
    """exp(x) bounds for ``0 <= x <= 1/2`` in fixed point."""
    one = 1 << prec
    xl = (x.numerator << prec) // x.denominator
    xh = _ceil_div(x.numerator << prec, x.denominator)
    tl, th = one, one
    sl, sh = one, one
    j = 1
    while True:
        tl = (tl * xl) // (one * j)
        th = _ceil_div(th * xh, one * j)
        sl += tl
        sh += th
        j += 1
        if th <= 2:
            # geometric tail with ratio <= 1/2
            sh += 2 * th + 1
            return sl, sh


def exp_enclosure(x, eps) -> RationalEnclosure:
    """Enclosure of ``exp(x)`` of width at most ``eps``."""
    x, eps = as_fraction(x), as_fraction(eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    if x == 0:
        return RationalEnclosure.exact(1)
    if x < 0:
        # exp(x) < 1, so width of the reciprocal is at most the width of exp(-x)
        return _exp_positive(-x, eps).reciprocal()
    return _exp_positive(x, eps)


def _exp_positive(x: Fraction, eps: Fraction) -> RationalEnclosure:
    squarings = 0
    y = x
    while y > Fraction(1, 2):
        y /= 2
        squarings += 1
    # relative error is amplified ~2^squarings; magnitude is about e^x
    mag_bits = int(x) * 3 // 2 + 2
    prec = max(40, _bits_of(eps) + mag_bits + squarings + 8)
    while True:
        lo, hi = _exp_small_fixed(y, prec)
        enc = RationalEnclosure(Fraction(lo, 1 << prec), Fraction(hi, 1 << prec))
        for _ in range(squarings):
            enc = (enc * enc).rounded(prec + mag_bits + 4)
        if enc.width <= eps:
            return enc
        prec *= 2


def e_enclosure(eps) -> RationalEnclosure:
    return exp_enclosure(1, eps)


@lru_cache(maxsize=512)
def _e_power_cached(l: int, bits: int) -> RationalEnclosure:
    return exp_enclosure(l, Fraction(1, 1 << bits))


def e_power_enclosure(l: int, bits: int = 64) -> RationalEnclosure:
    """Cached enclosure of ``e**l`` with absolute width at most ``2^-bits``."""
    return _e_power_cached(int(l), int(bits))


def floor_of_enclosure(
    v: RationalEnclosure,
    refine: Callable[[Fraction], RationalEnclosure] | None = None,
    cap_bits: int | None = None,
) -> int:
    """``floor`` of the real enclosed by ``v``, tightening through ``refine`` as needed."""
    cap = PRECISION_CAP_BITS if cap_bits is None else cap_bits
    enc = v
    schedule = _eps_schedule(cap)
    while True:
        if enc.is_exact:
            return math.floor(enc.lo)
        f = math.floor(enc.lo)
        if enc.hi < f + 1:
            return f
        if refine is None:
            raise UndecidableFloor(f"enclosure {enc!r} straddles {f + 1} and cannot be refined")
        try:
            bits = next(schedule)
        except StopIteration:
            raise UndecidableFloor(f"enclosure {enc!r} straddles {f + 1} at 2^-{cap}") from None
        enc = refine(Fraction(1, 1 << bits))
