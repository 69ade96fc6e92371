import math
from fractions import Fraction

import mpmath
import pytest

from cantorkit.cantor_core import MismatchedFrame, intersect_schedules
from cantorkit.certify import check_condition13
from cantorkit.littlewood import (
    PROP1,
    PROP2,
    DSequence,
    InstanceParams,
    littlewood_schedule,
)
from cantorkit.littlewood.sieve import (
    FullState,
    InvalidParams,
    NoSurvivor,
    NodeCapExceeded,
    RationalCandidate,
    WitnessCertificate,
    WitnessState,
    build_full,
    build_level,
    delta_interval,
    enumerate_candidates,
    joint_witness,
    kill_range,
    stratum_of,
    witness,
)
from cantorkit.rigor import ClosedInterval

from _oracles import brute_candidates, mp_f

mpmath.mp.prec = 200

SMALL_C1 = Fraction(1, 64)


def small(D, c=Fraction(1, 10 ** 6), variant=PROP1, R=16):
    return InstanceParams(R, SMALL_C1, c, variant, D)


@pytest.mark.parametrize("D", [DSequence.constant(2), DSequence.constant(3)])
@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("c", [Fraction(1, 1000), Fraction(1, 10 ** 6)])
def test_enumeration_equals_brute_force(D, n, c):
    p = small(D, c)
    found = [(x.r, x.q) for x in enumerate_candidates(n, p.root, p)]
    assert len(found) == len(set(found))
    assert set(found) == brute_candidates(n, p, p.root)


@pytest.mark.parametrize("variant", [PROP1, PROP2])
def test_enumeration_in_a_small_window(variant):
    p = small(DSequence.constant(2), Fraction(1, 1000), variant)
    window = ClosedInterval(Fraction(1, 128) - SMALL_C1 / 32, Fraction(1, 128) + SMALL_C1 / 32)
    found = {(x.r, x.q) for x in enumerate_candidates(2, window, p)}
    assert found == brute_candidates(2, p, window)
    assert found


def test_candidate_fields_are_consistent():
    p = small(DSequence.constant(2), Fraction(1, 1000))
    lo, hi = p.height_range(2)
    for cand in enumerate_candidates(2, p.root, p):
        Dk = p.D.D(cand.k)
        assert cand.q == Dk * cand.qbar and cand.qbar % p.D.d(cand.k + 1) != 0
        assert cand.height == cand.q * cand.q // Dk
        assert lo <= cand.height < hi
        l = int(mpmath.floor(mpmath.log(mpmath.mpf(cand.height) / lo)))
        assert cand.stratum == l == stratum_of(cand.height, 2, p)


@pytest.mark.parametrize("variant", [PROP1, PROP2])
def test_inner_and_outer_intervals_bracket_the_true_one(variant):
    p = InstanceParams(1 << 18, Fraction(1, 1 << 27), Fraction(1, 1 << 80), variant, DSequence.constant(2))
    for q, r in [(3, 0), (1000, 1), (12345, 7), (2 ** 20 + 1, 5)]:
        k = p.D.valuation(q)
        H = q * q // p.D.D(k)
        cand = RationalCandidate(r, q, k, q // p.D.D(k), H, 0)
        outer = delta_interval(cand, p, "outer")
        inner = delta_interval(cand, p, "inner")
        true_rho = mpmath.mpf(p.c.numerator) / p.c.denominator / (mp_f(q, variant.tag) * H)
        centre = mpmath.mpf(r) / q
        assert outer.left <= inner.left and inner.right <= outer.right
        assert mpmath.mpf(outer.left.numerator) / outer.left.denominator <= centre - true_rho
        assert mpmath.mpf(inner.left.numerator) / inner.left.denominator >= centre - true_rho


def test_exclusion_interval_is_exact_when_f_is_one():
    # log*(2) = 1 and log*(log 2) = 1, so f(2) = 1 and the radius is c / H exactly
    p = small(DSequence.constant(3), Fraction(1, 1000))
    cand = RationalCandidate(1, 2, 0, 2, 4, 0)
    outer = delta_interval(cand, p, "outer")
    assert outer == delta_interval(cand, p, "inner")
    assert outer == ClosedInterval(Fraction(1, 2) - Fraction(1, 4000), Fraction(1, 2) + Fraction(1, 4000))


def test_kill_range_covers_exactly_the_cells_met():
    p = small(DSequence.constant(2), Fraction(1, 1000))
    level = 3
    step = p.level_length(level)
    for cand in enumerate_candidates(2, p.root, p):
        lo, hi = kill_range(cand, p, level)
        delta = delta_interval(cand, p, "outer")
        for j in (lo, hi):
            cell = ClosedInterval(p.root.left + j * step, p.root.left + (j + 1) * step)
            assert cell.meets(delta)
        for j in (lo - 1, hi + 1):
            cell = ClosedInterval(p.root.left + j * step, p.root.left + (j + 1) * step)
            assert not cell.meets(delta)
        assert hi - lo + 1 <= math.ceil(delta.length / step) + 2


def test_depth_one_witness_removes_nothing():
    w = witness(small(DSequence.constant(2)), 1, uncertified=True)
    assert w.chain_indices == [0, 0]
    assert w.steps[0].candidates == [0] and w.height_bound == 1


def test_uncertified_witness_and_full_build_agree():
    p = small(DSequence.constant(2))
    levels, ledgers = build_full(p, 3, uncertified=True)
    w = witness(p, 3, uncertified=True)
    assert w.chain_indices == [0, 0, 1, 48]
    for n in range(1, 4):
        R_prev = p.R_n(n - 1)
        kids = [i for i in levels[n].indices if i // R_prev == w.chain_indices[n - 1]]
        assert w.chain_indices[n] == min(kids)
    assert [len(x) for x in levels] == [1, 16, 511, 24518]
    assert ledgers[1].counts == {(0, 0): 1}


def test_large_constant_kills_the_leftmost_chain():
    p = small(DSequence.constant(2), Fraction(1, 1000))
    with pytest.raises(NoSurvivor) as info:
        witness(p, 3, uncertified=True)
    assert info.value.level == 2
    assert any((c.r, c.q) == (0, 1) for c in info.value.candidates)


def test_invalid_constants_need_uncertified_mode():
    with pytest.raises(InvalidParams):
        witness(small(DSequence.constant(2)), 2)
    with pytest.raises(InvalidParams):
        build_full(small(DSequence.constant(2)), 2)


def test_node_cap():
    with pytest.raises(NodeCapExceeded):
        build_full(small(DSequence.constant(2)), 3, node_cap=1000, uncertified=True)


def test_build_level_steps_match_witness():
    p = small(DSequence.constant(3))
    state = WitnessState([p], [0])
    for _ in range(3):
        state, _ = build_level(state, "witness", certified=False)
    assert state.chain == witness(p, 3, uncertified=True).chain_indices
    from cantorkit.cantor_core import LevelCollection

    full = FullState(p, [LevelCollection(0, p.root, 1, (0,), ())])
    full, _ = build_level(full, "full", certified=False)
    assert len(full.levels[-1]) == 16
    with pytest.raises(TypeError):
        build_level(full, "witness")


def test_joint_witness_rejects_different_frames():
    a = small(DSequence.constant(2))
    b = small(DSequence.constant(3), R=32)
    with pytest.raises(MismatchedFrame):
        joint_witness([a, b], 2, uncertified=True)


def test_joint_witness_uses_union_of_removals():
    a = small(DSequence.constant(2))
    b = small(DSequence.constant(3))
    certs = joint_witness([a, b], 3, uncertified=True)
    assert [c.position for c in certs] == [0, 1]
    assert certs[0].chain == certs[1].chain
    step = certs[0].steps[2]
    assert max(step.kills) <= step.combined_kills <= sum(step.kills)


def test_witness_certificate_json_round_trip():
    w = witness(small(DSequence.constant(2)), 3, uncertified=True)
    again = WitnessCertificate.from_json(w.to_json())
    assert again.chain == w.chain and again.chain_indices == w.chain_indices
    assert again.height_bound == w.height_bound and again.params == w.params
    assert [lg.counts for lg in again.ledgers] == [lg.counts for lg in w.ledgers]


@pytest.mark.parametrize("k", [2, 3])
def test_summed_budgets_of_several_instances_pass_the_dimension_condition(k):
    schedules = [
        littlewood_schedule(InstanceParams(1 << 20, Fraction(1, 1 << 29), Fraction(1, 1 << 84), PROP1,
                                           DSequence.constant(p)))
        for p in (2, 3, 5)[:k]
    ]
    cert = check_condition13(intersect_schedules(schedules), 30)
    assert cert.passed
