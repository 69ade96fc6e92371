import math
import random
from fractions import Fraction

import mpmath
import pytest

from cantorkit.cantor_core import CantorSchedule, build, middle_rule
from cantorkit.certify import (
    DegenerateRecursion,
    certify_nonempty,
    check_condition13,
    dimension_lower_bound,
    t_sequence,
)
from cantorkit.rigor import ClosedInterval, RationalEnclosure, Real, log_enclosure

from _oracles import adversarial_builds, random_schedule


def test_middle_third_t_values_are_two():
    schedule = CantorSchedule.middle_third(12)
    cert = certify_nonempty(schedule, 12)
    assert cert.passed
    assert cert.t_values == [2] * 12
    assert cert.survivor_lower_bounds == [2 ** n for n in range(13)]


def test_t_values_with_an_older_stratum():
    # R = 4, r_{0,0} = 1, r_{0,1} = 3: t_0 = 3, t_1 = 4 - 3/3 = 3
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(0, 0): 1, (0, 1): 3})
    assert t_sequence(schedule, 2) == [3, 3]
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 4, 5], {(0, 0): 1, (1, 2): 6, (2, 2): 1})
    assert t_sequence(schedule, 3) == [3, 4, 5 - 1 - Fraction(6, 4)]


def test_t_sequence_stops_at_first_non_positive_term():
    schedule = CantorSchedule(ClosedInterval(0, 1), [2, 2, 2], {(1, 1): 2})
    assert t_sequence(schedule, 3) == [2, 0]
    cert = certify_nonempty(schedule, 3)
    assert not cert.passed and cert.first_failure == 1
    with pytest.raises(DegenerateRecursion):
        t_sequence(schedule, 3, strict=True)


def test_real_budgets_agree_with_mpmath():
    ln3 = Real(lambda eps: log_enclosure(3, eps), "ln 3")
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 4, 4], {(0, 0): ln3, (0, 2): ln3, (1, 1): 1})
    ts = t_sequence(schedule, 3)
    L = mpmath.log(3)
    t0 = 4 - L
    t1 = mpmath.mpf(3)
    t2 = 4 - L / (t0 * t1)
    for enc, exact in zip(ts, (t0, t1, t2)):
        assert isinstance(enc, RationalEnclosure)
        assert mpmath.mpf(enc.lo.numerator) / enc.lo.denominator <= exact
        assert exact <= mpmath.mpf(enc.hi.numerator) / enc.hi.denominator
    assert certify_nonempty(schedule, 3).passed


def test_boundary_schedule_passes_dimension_condition_with_equality():
    schedule = CantorSchedule.constant(4, 1, horizon=8)
    cert = check_condition13(schedule, 8)
    assert cert.passed
    assert all(row.lhs == row.rhs == 1 for row in cert.rows)
    assert cert.bound.value == RationalEnclosure.exact(Fraction(1, 2))
    assert cert.bound.rigorous


def test_middle_third_fails_dimension_condition_on_branching():
    cert = check_condition13(CantorSchedule.middle_third(4), 4)
    assert not cert.passed
    assert cert.reason == "R_0 = 3 < 4"
    with pytest.raises(ValueError):
        dimension_lower_bound(CantorSchedule.middle_third(4), 4)


def test_condition_fails_when_budget_sum_is_too_large():
    schedule = CantorSchedule(ClosedInterval(0, 1), [8, 8], {(0, 1): 5})  # 5 * 4/8 = 2.5 > 2
    cert = check_condition13(schedule, 2)
    assert not cert.passed and cert.first_failure == 1
    assert cert.rows[1].lhs == Fraction(5, 2)


def test_dimension_bound_for_non_power_of_two_matches_mpmath():
    schedule = CantorSchedule(ClosedInterval(0, 1), [7, 6, 9], {(0, 0): 1})
    bound = dimension_lower_bound(schedule, 3)
    assert bound.argmin == 1 and not bound.rigorous
    exact = 1 - mpmath.log(2) / mpmath.log(6)
    lo = mpmath.mpf(bound.value.lo.numerator) / bound.value.lo.denominator
    hi = mpmath.mpf(bound.value.hi.numerator) / bound.value.hi.denominator
    assert lo <= exact <= hi and hi - lo < mpmath.mpf(2) ** -60
    assert "empirical liminf" in bound.describe()


def test_dimension_condition_with_real_budgets():
    half_ln2 = Real(lambda eps: log_enclosure(2, 2 * eps) / 2, "ln2/2")
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(0, 0): half_ln2, (0, 1): 1})
    cert = check_condition13(schedule, 2)
    assert cert.passed  # 1 * 4/4 = 1 <= 1, and ln 2 / 2 <= 1


def test_certificates_serialize():
    cert = certify_nonempty(CantorSchedule.constant(5, 2, horizon=3), 3)
    obj = cert.to_json()
    assert obj["verdict"] == "pass" and len(obj["t_values"]) == 3
    assert "non-emptiness: pass" in cert.report()
    dim = check_condition13(CantorSchedule.constant(4, 1, horizon=3), 3).to_json()
    assert dim["bound"]["value"]["lo"] == {"num": "1", "den": "2"}


def test_survivor_bound_holds_against_adversaries_on_random_schedules():
    rng = random.Random(20240611)
    passed = failed = witnessed = 0
    for _ in range(120):
        schedule = random_schedule(rng, rng.randint(1, 6))
        depth = schedule.horizon
        cert = certify_nonempty(schedule, depth)
        builds = list(adversarial_builds(schedule, rng))
        if cert.passed:
            passed += 1
            for b in builds:
                assert b.empty_at is None
                for n, count in enumerate(b.counts()):
                    assert count >= math.ceil(cert.survivor_lower_bounds[n])
        else:
            failed += 1
            witnessed += any(b.empty_at is not None for b in builds)
    assert passed > 0 and failed > 0
    assert witnessed * 2 >= failed


def test_middle_rule_never_beats_the_certificate():
    b = build(CantorSchedule.constant(5, 2, horizon=6), middle_rule(2), 6)
    cert = certify_nonempty(CantorSchedule.constant(5, 2, horizon=6), 6)
    assert b.counts() == [int(x) for x in cert.survivor_lower_bounds]
