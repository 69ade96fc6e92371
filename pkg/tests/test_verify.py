import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantorkit.littlewood import PROP1, PROP2, DSequence, InstanceParams
from cantorkit.littlewood.sieve import WitnessCertificate, witness
from cantorkit.littlewood.verify import (
    check_chain,
    check_counting_bounds,
    check_f_lower_bound,
    corrupt_onto,
    min_distance,
    sieve_soundness,
    verify_witness,
)
from cantorkit.rigor import ClosedInterval

CERTIFIED = dict(R=1 << 18, c1=Fraction(1, 1 << 27), c=Fraction(1, 1 << 80))


@pytest.fixture(scope="module")
def small_cert():
    p = InstanceParams(16, Fraction(1, 64), Fraction(1, 10 ** 6), PROP1, DSequence.constant(2))
    return witness(p, 3, uncertified=True)


@pytest.fixture(scope="module")
def certified():
    p = InstanceParams(variant=PROP1, D=DSequence.constant(2), **CERTIFIED)
    return witness(p, 2)


def test_small_witness_verifies(small_cert):
    report = verify_witness(small_cert, 5000)
    assert report.passed
    assert report.checked + report.skipped == 5000
    assert report.height_bound == 16 * 2 * 16  # R^2 F(2)
    soundness = sieve_soundness(small_cert)
    assert soundness.passed and not soundness.inner_hits
    assert soundness.checked == sum(1 for q in range(1, 600) if q * q // _dk(q, 2) < 512)


def _dk(q, p):
    d = 1
    while q % (d * p) == 0:
        d *= p
    return d


def test_certified_depth_two_witness(certified):
    assert certified.certified and certified.chain_indices == [0, 0, 1]
    assert verify_witness(certified, 10 ** 5).passed
    assert sieve_soundness(certified).passed
    counting = check_counting_bounds(certified)
    assert counting.passed and counting.rows


@pytest.mark.parametrize("r, q", [(0, 1), (1, 128), (1, 96)])
def test_moving_the_final_interval_onto_a_rational_is_caught(small_cert, r, q):
    bad = corrupt_onto(small_cert, r, q)
    report = verify_witness(bad, 1000)
    assert not report.passed
    assert any(Fraction(v.r, v.q) == Fraction(r, q) for v in report.violations)
    soundness = sieve_soundness(bad)
    assert not soundness.passed
    assert any(Fraction(v.r, v.q) == Fraction(r, q) for v in soundness.inner_hits)


def test_certified_negative_control(certified):
    bad = corrupt_onto(certified, 0, 1)
    report = verify_witness(bad, 100)
    # 0 lies in the final interval, so every denominator in range fails with distance 0
    assert [(v.r, v.q) for v in report.violations] == [(0, q) for q in range(1, 101)]


def test_chain_problems_are_reported(small_cert):
    broken = WitnessCertificate(small_cert.params, small_cert.chain[:-1] + [ClosedInterval(0, 1)],
                                small_cert.chain_indices, small_cert.ledgers, small_cert.height_bound, False)
    problems = check_chain(broken)
    assert any("length" in p for p in problems) and any("not inside" in p for p in problems)
    wrong_bound = WitnessCertificate(small_cert.params, small_cert.chain, small_cert.chain_indices,
                                     small_cert.ledgers, small_cert.height_bound * 2, False)
    assert not verify_witness(wrong_bound, 10).passed


def test_verification_survives_json_round_trip(small_cert):
    text = json.dumps(small_cert.to_json())
    again = WitnessCertificate.from_json(json.loads(text))
    assert verify_witness(again, 2000).to_json() == verify_witness(small_cert, 2000).to_json()


@given(st.integers(1, 300), st.fractions(min_value=0, max_value=3), st.fractions(min_value=0, max_value=Fraction(1, 50)))
@settings(max_examples=300, deadline=None)
def test_min_distance_matches_scan(q, left, width):
    J = ClosedInterval(left, left + width)
    m, r = min_distance(q, J)
    lo, hi = q * J.left, q * J.right
    best = min(max(Fraction(0), lo - s, s - hi) for s in range(math.floor(lo) - 1, math.ceil(hi) + 2))
    assert m == best
    assert max(Fraction(0), lo - r, r - hi) == best


@pytest.mark.parametrize("variant", [PROP1, PROP2])
@pytest.mark.parametrize("D", [DSequence.constant(2), DSequence.constant(3), DSequence.doubling()])
def test_f_lower_bound_holds_on_early_levels(variant, D):
    p = InstanceParams(variant=variant, D=D, **CERTIFIED)
    for n in range(1, 6):
        result = check_f_lower_bound(p, n)
        assert result.passed, (n, result)


def test_verify_rejects_bad_q_max(small_cert):
    with pytest.raises(ValueError):
        verify_witness(small_cert, 0)
