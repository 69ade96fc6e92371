from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantorkit.rigor import (
    ClosedInterval,
    DomainError,
    RationalEnclosure,
    Real,
    UndecidableComparison,
    UndecidableFloor,
    compare,
    decide_sign,
    e_enclosure,
    e_power_enclosure,
    exp_enclosure,
    floor_of_enclosure,
    fraction_from_json,
    fraction_to_json,
    log_enclosure,
    log_star,
    log_star_enclosure,
    parse_rational,
)

mpmath.mp.prec = 200

positive = st.fractions(min_value=Fraction(1, 10 ** 6), max_value=Fraction(10 ** 9)).filter(lambda x: x > 0)
eps_bits = st.integers(min_value=8, max_value=120)


def mp(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


def contains(enc: RationalEnclosure, value) -> bool:
    return mp(enc.lo) <= value <= mp(enc.hi)


@given(positive, eps_bits)
@settings(max_examples=200, deadline=None)
def test_log_enclosure_contains_mpmath(x, bits):
    eps = Fraction(1, 1 << bits)
    enc = log_enclosure(x, eps)
    assert enc.width <= eps
    assert contains(enc, mpmath.log(mp(x)))


@given(st.fractions(min_value=-40, max_value=40), eps_bits)
@settings(max_examples=200, deadline=None)
def test_exp_enclosure_contains_mpmath(x, bits):
    eps = Fraction(1, 1 << bits)
    enc = exp_enclosure(x, eps)
    assert enc.width <= eps
    assert contains(enc, mpmath.exp(mp(x)))


def test_e_and_its_powers():
    assert contains(e_enclosure(Fraction(1, 1 << 100)), mpmath.e)
    for l in (0, 1, 2, 5, 13, 40):
        enc = e_power_enclosure(l)
        assert contains(enc, mpmath.exp(l))
        assert mp(enc.width) <= mpmath.exp(l) * mpmath.mpf(2) ** -60


def test_log_of_exact_power_of_two_and_one():
    assert log_enclosure(1, Fraction(1, 1 << 30)) == RationalEnclosure.exact(0)
    enc = log_enclosure(1 << 18, Fraction(1, 1 << 80))
    assert contains(enc, 18 * mpmath.log(2))


def test_log_rejects_non_positive():
    with pytest.raises(DomainError):
        log_enclosure(0, Fraction(1, 100))
    with pytest.raises(DomainError):
        log_enclosure(-3, Fraction(1, 100))


@pytest.mark.parametrize("x, expected", [(Fraction(1, 2), 1), (2, 1), (0, 1), (-5, 1)])
def test_log_star_is_one_below_e(x, expected):
    assert log_star(x) == expected


def test_log_star_follows_ln_above_e():
    value = log_star(16)
    assert isinstance(value, Real)
    assert contains(value.enclose(Fraction(1, 1 << 60)), mpmath.log(16))
    near_e = log_star_enclosure(Fraction(2718281828, 10 ** 9), Fraction(1, 1 << 40))
    assert near_e.lo >= 1


@given(positive, positive, st.sampled_from(["+", "-", "*", "/"]))
@settings(max_examples=200, deadline=None)
def test_enclosure_arithmetic_contains_exact_result(a, b, op):
    ea = RationalEnclosure(a - Fraction(1, 1000), a + Fraction(1, 1000))
    eb = RationalEnclosure(b, b + Fraction(1, 7))
    exact = {"+": a + b, "-": a - b, "*": a * b, "/": a / b}[op]
    enc = {"+": ea + eb, "-": ea - eb, "*": ea * eb, "/": ea / eb}[op]
    assert enc.contains(exact)


@given(st.fractions(min_value=-5, max_value=5), st.fractions(min_value=0, max_value=2), st.integers(0, 5))
def test_enclosure_power_contains_every_point(lo, width, k):
    enc = RationalEnclosure(lo, lo + width)
    result = enc ** k
    for x in (lo, lo + width / 2, lo + width):
        assert result.contains(x ** k)


def test_reciprocal_of_interval_through_zero_fails():
    with pytest.raises(ZeroDivisionError):
        RationalEnclosure(-1, 1).reciprocal()


def test_rounding_is_outward():
    enc = RationalEnclosure(Fraction(1, 3), Fraction(2, 3)).rounded(20)
    assert enc.lo <= Fraction(1, 3) and enc.hi >= Fraction(2, 3)
    assert enc.lo.denominator & (enc.lo.denominator - 1) == 0


def test_compare_decides_close_reals():
    ln2 = Real(lambda eps: log_enclosure(2, eps), "ln 2")
    assert compare(ln2, Fraction(693147, 10 ** 6)) > 0
    assert compare(ln2, Fraction(693148, 10 ** 6)) < 0
    assert compare(Fraction(1, 3), Fraction(1, 3)) == 0


def test_decide_sign_gives_up_at_the_cap():
    with pytest.raises(UndecidableComparison):
        decide_sign(lambda eps: RationalEnclosure(-eps, eps), cap_bits=64)


def test_floor_of_enclosure_refines_and_gives_up():
    enc = RationalEnclosure(Fraction(29, 10), Fraction(31, 10))
    assert floor_of_enclosure(enc, refine=lambda eps: RationalEnclosure(3 - eps / 2, 3 - eps / 4)) == 2
    with pytest.raises(UndecidableFloor):
        floor_of_enclosure(RationalEnclosure(Fraction(29, 10), Fraction(31, 10)),
                           refine=lambda eps: RationalEnclosure(3 - eps / 2, 3 + eps / 2), cap_bits=40)


@given(st.fractions())
def test_rational_json_round_trip(x):
    obj = fraction_to_json(x)
    assert isinstance(obj["num"], str) and isinstance(obj["den"], str)
    assert fraction_from_json(obj) == x


@pytest.mark.parametrize("text, value", [
    ("3/4", Fraction(3, 4)), ("0.125", Fraction(1, 8)), ("-7", Fraction(-7)),
    ("2^-27", Fraction(1, 1 << 27)), ("2**10", Fraction(1024)),
])
def test_parse_rational(text, value):
    assert parse_rational(text) == value


def test_parse_rational_rejects_garbage():
    with pytest.raises(ValueError):
        parse_rational("one half")


def test_closed_interval_meets_on_shared_endpoint():
    a = ClosedInterval(0, Fraction(1, 2))
    b = ClosedInterval(Fraction(1, 2), 1)
    assert a.meets(b) and b.meets(a)
    assert not a.meets(ClosedInterval(Fraction(3, 4), 1))
    assert ClosedInterval.from_json(a.to_json()) == a
    with pytest.raises(ValueError):
        ClosedInterval(1, 0)
