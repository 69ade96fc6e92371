import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantorkit.cantor_core import (
    BudgetExceeded,
    CantorSchedule,
    LevelCollection,
    LevelMismatch,
    MismatchedFrame,
    RemovalLedger,
    build,
    check_counting,
    check_nesting,
    greedy_adversary,
    intersect_builds,
    intersect_levels,
    intersect_schedules,
    middle_rule,
    no_removal,
    offset_rule,
    random_rule,
    union_rule,
)
from cantorkit.rigor import ClosedInterval, Real, log_enclosure


def test_middle_third_counts_and_endpoints():
    b = build(CantorSchedule.middle_third(12), middle_rule(1), 12)
    assert b.counts() == [2 ** n for n in range(13)]
    assert b.empty_at is None
    assert b[1].intervals == (ClosedInterval(0, Fraction(1, 3)), ClosedInterval(Fraction(2, 3), 1))
    assert b[2].interval(1) == ClosedInterval(Fraction(2, 9), Fraction(1, 3))
    assert check_nesting(b.levels)
    assert all(check_counting(b))


def test_zero_budget_keeps_everything():
    schedule = CantorSchedule(ClosedInterval(0, 1), [2, 2])
    b = build(schedule, no_removal, 2)
    assert b.counts() == [1, 2, 4]


def test_over_budget_rule_raises_with_location():
    schedule = CantorSchedule.constant(4, 1, horizon=3)
    with pytest.raises(BudgetExceeded) as info:
        build(schedule, offset_rule([0, 1]), 2)
    assert (info.value.m, info.value.ancestor, info.value.count) == (0, 0, 2)


def test_child_listed_in_two_strata_is_charged_once_to_the_highest():
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(1, 1): 1, (0, 1): 1})

    def rule(n, candidates, history, sched):
        if n == 1:
            yield 0, 0
            yield 0, 1

    b = build(schedule, rule, 2)
    assert b.ledgers[1].counts == {(1, 0): 1}
    assert len(b[2]) == 15


def test_stratum_budget_spans_the_whole_ancestor():
    # r_{0,1} = 2 allows two removals anywhere inside the root across all 4 parents
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(0, 1): 2})

    def rule(n, candidates, history, sched):
        if n == 1:
            yield 0, 0
            yield 15, 0

    b = build(schedule, rule, 2)
    assert b.counts() == [1, 4, 14]
    bad = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(0, 1): 1})
    with pytest.raises(BudgetExceeded):
        build(bad, rule, 2)


def test_rule_targeting_bad_positions_is_rejected():
    schedule = CantorSchedule.constant(3, 1, horizon=2)
    with pytest.raises(ValueError):
        build(schedule, lambda n, c, h, s: [(99, 0)], 1)
    with pytest.raises(ValueError):
        build(schedule, lambda n, c, h, s: [(0, 5)], 1)


def test_union_rule_deduplicates():
    schedule = CantorSchedule.constant(3, 1, horizon=4)
    b = build(schedule, union_rule(middle_rule(1), middle_rule(1)), 4)
    assert b.counts() == [1, 2, 4, 8, 16]


def test_empty_level_is_reported():
    schedule = CantorSchedule(ClosedInterval(0, 1), [2, 2], {(0, 0): 2, (1, 1): 2})
    b = build(schedule, greedy_adversary("left"), 2)
    assert b.empty_at == 1
    assert b.counts() == [1, 0]


@pytest.mark.parametrize("order", ["left", "right", "random", "cluster"])
def test_greedy_adversary_saturates_within_budget(order):
    schedule = CantorSchedule(ClosedInterval(0, 1), [5, 5, 5], {(0, 0): 1, (1, 1): 1, (0, 1): 3, (2, 2): 2})
    b = build(schedule, greedy_adversary(order, random.Random(3)), 3)
    assert all(check_counting(b))
    assert b.ledgers[1].by_stratum() == {1: 4, 0: 3}
    assert all(lg.replay(schedule) for lg in b.ledgers)


def test_real_budgets_are_compared_through_enclosures():
    ln5 = Real(lambda eps: log_enclosure(5, eps), "ln 5")  # 1.609...
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(0, 0): ln5, (1, 1): ln5})
    b = build(schedule, greedy_adversary("left"), 2)
    assert b.counts() == [1, 3, 9]


def test_random_rule_respects_budgets():
    rng = random.Random(5)
    schedule = CantorSchedule(ClosedInterval(0, 1), [4, 5, 4], {(0, 0): 1, (0, 1): 4, (2, 2): 1, (1, 2): 2})
    for _ in range(20):
        b = build(schedule, random_rule(rng, fill=0.5), 3)
        assert all(check_counting(b))


def test_schedule_json_round_trip():
    schedule = CantorSchedule(ClosedInterval(Fraction(1, 3), 1), [3, 4, 5],
                              {(0, 0): Fraction(1, 2), (0, 2): 7, (2, 2): 1}, nondecreasing=True)
    again = CantorSchedule.from_json(schedule.to_json())
    assert again.to_json() == schedule.to_json()
    assert again.nondecreasing
    assert again.r(0, 2) == 7 and again.r(1, 2) == 0


def test_nondecreasing_flag_is_checked():
    with pytest.raises(ValueError):
        CantorSchedule(ClosedInterval(0, 1), [4, 3], nondecreasing=True)


def test_schedule_validation():
    with pytest.raises(ValueError):
        CantorSchedule(ClosedInterval(0, 1), [1, 2])
    with pytest.raises(ValueError):
        CantorSchedule(ClosedInterval(0, 1), [2, 2], {(1, 0): 1})
    with pytest.raises(ValueError):
        CantorSchedule(ClosedInterval(0, 1), [2, 2], {(0, 0): -1})
    with pytest.raises(IndexError):
        CantorSchedule(ClosedInterval(0, 1), [2, 2]).R(2)


levels = st.builds(
    lambda left, width, scale, picks: LevelCollection(
        3, ClosedInterval(left, left + width), scale, tuple(sorted(set(p % scale for p in picks))), ()),
    st.fractions(min_value=0, max_value=5),
    st.fractions(min_value=Fraction(1, 100), max_value=10).filter(lambda w: w > 0),
    st.integers(1, 200),
    st.lists(st.integers(0, 10 ** 6), min_size=1, max_size=30),
)


@given(levels)
@settings(max_examples=100, deadline=None)
def test_level_json_round_trip(level):
    assert LevelCollection.from_json(level.to_json()) == level


def test_level_from_json_without_frame_keys():
    b = build(CantorSchedule.middle_third(3), middle_rule(1), 3)
    obj = b[3].to_json()
    del obj["root"], obj["scale"]
    again = LevelCollection.from_json(obj)
    assert again.intervals == b[3].intervals


def test_ledger_json_round_trip():
    ledger = RemovalLedger(2, {(0, 0): 3, (2, 7): 1}, (1, 5, 9))
    assert RemovalLedger.from_json(ledger.to_json()) == ledger


def test_intersect_schedules_sums_budgets():
    a = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(0, 0): 1, (0, 1): 2})
    b = CantorSchedule(ClosedInterval(0, 1), [4, 4], {(0, 0): Fraction(1, 2), (1, 1): 1})
    s = intersect_schedules([a, b])
    assert s.r(0, 0) == Fraction(3, 2) and s.r(0, 1) == 2 and s.r(1, 1) == 1


@pytest.mark.parametrize("other", [
    CantorSchedule(ClosedInterval(0, 2), [4, 4]),
    CantorSchedule(ClosedInterval(0, 1), [4, 5]),
    CantorSchedule(ClosedInterval(0, 1), [4, 4, 4]),
])
def test_intersect_schedules_rejects_mismatched_frames(other):
    with pytest.raises(MismatchedFrame):
        intersect_schedules([CantorSchedule(ClosedInterval(0, 1), [4, 4]), other])


def test_intersect_builds_is_setwise_intersection():
    schedule = CantorSchedule.constant(4, 1, horizon=4)
    left = build(schedule, offset_rule([0]), 4)
    right = build(schedule, offset_rule([3]), 4)
    both = intersect_builds(left.levels, right.levels)
    assert [len(x) for x in both] == [1, 2, 4, 8, 16]
    for n, level in enumerate(both):
        assert set(level.intervals) == set(left[n].intervals) & set(right[n].intervals)
    assert check_nesting(both)


def test_intersect_levels_rejects_different_lengths():
    a = build(CantorSchedule.constant(4, 0, horizon=2), no_removal, 2)
    b = build(CantorSchedule.constant(2, 0, horizon=2), no_removal, 2)
    with pytest.raises(LevelMismatch):
        intersect_levels(a[2], b[2])
