"""Brute-force checks of witness certificates that do not reuse the builder.

The valuation, the minimum of ``||q alpha||`` over an interval and the ``f``
enclosures are recomputed here from the certificate's parameters alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from ..rigor import (
    ClosedInterval,
    RationalEnclosure,
    Real,
    compare,
    e_power_enclosure,
    fraction_to_json,
    log_enclosure,
    log_star_enclosure,
    log_star_of_enclosure,
)
from .instance import InstanceParams
from .sieve import WitnessCertificate

__all__ = [
    "CountingReport",
    "FLowerBound",
    "SoundnessReport",
    "VerificationReport",
    "Violation",
    "check_chain",
    "check_counting_bounds",
    "check_f_lower_bound",
    "corrupt_onto",
    "min_distance",
    "sieve_soundness",
    "verify_witness",
]

_EPS = Fraction(1, 1 << 64)


def _f(q: int, tag: str, eps: Fraction = _EPS) -> RationalEnclosure:
    ln_q = log_enclosure(q, eps / 8)
    if tag == "prop1":
        return log_star_enclosure(q, eps / 8) * log_star_of_enclosure(ln_q, eps / 8)
    a = log_star_of_enclosure(ln_q, eps / 8)
    return a * log_star_of_enclosure(a, eps / 8)


def _split(q: int, params: InstanceParams) -> tuple[int, int]:
    """``(D_k, q / D_k)`` for the largest ``k`` with ``D_k | q``, from the generator ``d_k``."""
    Dk, k = 1, 0
    while True:
        nxt = Dk * params.D.d(k + 1)
        if q % nxt:
            return Dk, q // Dk
        Dk, k = nxt, k + 1


def _as_integers(J: ClosedInterval) -> tuple[int, int, int]:
    W = math.lcm(J.left.denominator, J.right.denominator)
    return J.left.numerator * (W // J.left.denominator), J.right.numerator * (W // J.right.denominator), W


def min_distance(q: int, J: ClosedInterval) -> tuple[Fraction, int]:
    """``min ||q alpha||`` over ``alpha`` in ``J`` and the ``r`` attaining it."""
    A, B, W = _as_integers(J)
    lo, hi = q * A, q * B
    z = lo // W
    if lo == z * W:
        return Fraction(0), z
    if (z + 1) * W <= hi:
        return Fraction(0), z + 1
    left, right = lo - z * W, (z + 1) * W - hi
    return (Fraction(left, W), z) if left <= right else (Fraction(right, W), z + 1)


def _violates(q: int, qbar: int, m: Fraction, params: InstanceParams) -> tuple[bool, bool]:
    """``(violation, refined)``: decides ``f(q) qbar m <= c``; refined is True if logs were needed."""
    if m == 0:
        return True, False
    if qbar * m > params.c:  # f >= 1
        return False, False
    tag = params.variant.tag
    lhs = Real(lambda eps: _f(q, tag, eps / (qbar * m + 1)) * (qbar * m), label=f"f({q}) q |q|_D m")
    return compare(lhs, params.c) <= 0, True


@dataclass(frozen=True)
class Violation:
    r: int
    q: int
    height: int
    distance: Fraction

    def to_json(self) -> dict:
        return {"r": str(self.r), "q": str(self.q), "height": str(self.height),
                "distance": fraction_to_json(self.distance)}


def check_chain(cert: WitnessCertificate) -> list[str]:
    """Nesting and exact lengths ``c1 / (R^n F(n))`` of the certificate's chain."""
    p = cert.params
    problems = []
    for n, J in enumerate(cert.chain):
        if J.length != p.level_length(n):
            problems.append(f"level {n}: length {J.length} differs from {p.level_length(n)}")
        if n and not cert.chain[n - 1].contains(J):
            problems.append(f"level {n} is not inside level {n - 1}")
    if cert.chain and cert.chain[0] != p.root:
        problems.append("chain does not start at the root interval")
    if cert.height_bound != p.height_bound(cert.depth):
        problems.append(f"height bound {cert.height_bound} differs from {p.height_bound(cert.depth)}")
    return problems


@dataclass
class VerificationReport:
    q_max: int
    height_bound: int
    checked: int
    skipped: int
    refined: int
    violations: list[Violation]
    chain_problems: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.chain_problems

    def to_json(self) -> dict:
        return {
            "kind": "witness-verification",
            "verdict": "pass" if self.passed else "fail",
            "q_max": self.q_max,
            "height_bound": str(self.height_bound),
            "checked": self.checked,
            "skipped_out_of_range": self.skipped,
            "refined": self.refined,
            "violations": [v.to_json() for v in self.violations],
            "chain_problems": self.chain_problems,
        }

    def report(self) -> str:
        lines = [f"verification: {'pass' if self.passed else 'fail'}",
                 f"  q <= {self.q_max}, heights below {self.height_bound}",
                 f"  checked {self.checked}, out of range {self.skipped}, needed logs {self.refined}"]
        lines += [f"  chain: {msg}" for msg in self.chain_problems]
        for v in self.violations[:20]:
            lines.append(f"  violation at r/q = {v.r}/{v.q} (height {v.height}, min ||q a|| = {v.distance})")
        if len(self.violations) > 20:
            lines.append(f"  ... {len(self.violations) - 20} more")
        return "\n".join(lines)


def verify_witness(cert: WitnessCertificate, q_max: int) -> VerificationReport:
    """Check ``f(q) q |q|_D ||q alpha|| > c`` on the final interval for every ``q <= q_max``.

    Only ``q`` with height below the certificate's bound are in scope.
    """
    if q_max < 1:
        raise ValueError("q_max must be positive")
    p = cert.params
    J = cert.final
    bound = cert.height_bound
    checked = skipped = refined = 0
    violations = []
    for q in range(1, q_max + 1):
        Dk, qbar = _split(q, p)
        H = Dk * qbar * qbar
        if H >= bound:
            skipped += 1
            continue
        checked += 1
        m, r = min_distance(q, J)
        bad, used_logs = _violates(q, qbar, m, p)
        refined += used_logs
        if bad:
            violations.append(Violation(r, q, H, m))
    return VerificationReport(q_max, bound, checked, skipped, refined, violations, check_chain(cert))


def _all_q(params: InstanceParams, bound: int) -> Iterator[tuple[int, int, int]]:
    """Every ``(q, D_k, qbar)`` with ``D_k qbar^2 < bound``, each ``q`` exactly once."""
    Dk, k = 1, 0
    while Dk < bound:
        d_next = params.D.d(k + 1)
        qbar = 1
        while Dk * qbar * qbar < bound:
            if qbar % d_next:
                yield Dk * qbar, Dk, qbar
            qbar += 1
        Dk, k = Dk * d_next, k + 1


@dataclass
class SoundnessReport:
    height_bound: int
    checked: int
    inner_hits: list[Violation]
    violations: list[Violation]

    @property
    def passed(self) -> bool:
        return not self.inner_hits and not self.violations

    def to_json(self) -> dict:
        return {
            "kind": "sieve-soundness",
            "verdict": "pass" if self.passed else "fail",
            "height_bound": str(self.height_bound),
            "checked": self.checked,
            "inner_hits": [v.to_json() for v in self.inner_hits],
            "violations": [v.to_json() for v in self.violations],
        }


def sieve_soundness(cert: WitnessCertificate) -> SoundnessReport:
    """Enumerate every ``q`` below the height bound and test the final interval against it.

    ``inner_hits`` lists rationals whose inner exclusion interval meets the
    final interval; ``violations`` lists failures of the exact strict inequality.
    """
    p = cert.params
    J = cert.final
    A, B, W = _as_integers(J)
    cn, cd = p.c.numerator, p.c.denominator
    hits, violations = [], []
    checked = 0
    for q, Dk, qbar in _all_q(p, cert.height_bound):
        checked += 1
        m, r = min_distance(q, J)
        if qbar * m.numerator * cd > cn * m.denominator:
            continue  # clear of both tests since f >= 1
        H = Dk * qbar * qbar
        if m == 0 or _f(q, p.variant.tag).hi * qbar * m <= p.c:
            hits.append(Violation(r, q, H, m))
        if _violates(q, qbar, m, p)[0]:
            violations.append(Violation(r, q, H, m))
    return SoundnessReport(cert.height_bound, checked, hits, violations)


def corrupt_onto(cert: WitnessCertificate, r: int, q: int) -> WitnessCertificate:
    """Copy of ``cert`` whose final interval is moved to contain ``r/q``; a negative control."""
    p = cert.params
    step = p.level_length(cert.depth)
    j = math.floor((Fraction(r, q) - p.root.left) / step)
    j = min(j, p.scale(cert.depth) - 1)
    final = ClosedInterval(p.root.left + j * step, p.root.left + (j + 1) * step)
    chain = cert.chain[:-1] + [final]
    return WitnessCertificate(p, chain, cert.chain_indices[:-1] + [j], cert.ledgers,
                              cert.height_bound, cert.certified)


# ---------------------------------------------------------------------------
# intermediate counting bounds


@dataclass
class CountingRow:
    n: int
    k: int
    l: int
    points: int
    point_bound: float
    kills: int
    kill_bound: float
    ok: bool


@dataclass
class CountingReport:
    rows: list[CountingRow]
    width_checks: list[tuple[int, int, float, bool]]

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows) and all(w[3] for w in self.width_checks)


def check_counting_bounds(cert: WitnessCertificate) -> CountingReport:
    """Compare each step's per-``(k, l)`` counts with the separation and kill-width bounds.

    Needs the in-memory step reports of a freshly built certificate.
    """
    p = cert.params
    instance = cert.position
    rows, widths = [], []
    R2 = p.R * p.R
    for step in cert.steps:
        n = step.n
        if n < 1:
            continue
        for row in step.by_stratum[instance]:
            l = row["l"]
            el = e_power_enclosure(l)
            el1 = e_power_enclosure(l + 1)
            pts_bound = 2 + p.c1 * el1.lo
            kill_bound = pts_bound * (2 + 8 * p.c * R2 * (n + 1) / (p.c1 * el.hi))
            ok = row["points"] <= pts_bound and row["kills"] <= kill_bound
            rows.append(CountingRow(n, row["k"], l, row["points"], float(pts_bound),
                                    row["kills"], float(kill_bound), ok))
        base = p.height_range(n)[0]
        width_bound = 2 * p.c * p.scale(n + 1) / (p.c1 * base) + 2
        widest = step.max_kill_per_candidate[instance]
        widths.append((n, widest, float(width_bound), widest <= width_bound))
    return CountingReport(rows, widths)


@dataclass
class FLowerBound:
    n: int
    q_min: int
    f: RationalEnclosure
    target: RationalEnclosure
    passed: bool


def check_f_lower_bound(params: InstanceParams, n: int) -> FLowerBound:
    """Decide ``f(q) >= target(n)`` for every ``q`` whose height lies in level ``n``'s range.

    ``f`` is nondecreasing in ``q``, so the smallest admissible ``q`` decides it.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    lo_H, hi_H = params.height_range(n)
    q_min = None
    Dk, k = 1, 0
    while Dk < hi_H:
        d_next = params.D.d(k + 1)
        qbar = max(1, math.isqrt(-(-lo_H // Dk) - 1) + 1) if lo_H > Dk else 1
        while qbar % d_next == 0:
            qbar += 1
        if Dk * qbar * qbar < hi_H:
            q = Dk * qbar
            q_min = q if q_min is None else min(q_min, q)
        Dk, k = Dk * d_next, k + 1
    if q_min is None:
        raise ValueError(f"level {n} has no admissible q")
    tag = params.variant.tag
    f_real = Real(lambda eps: _f(q_min, tag, eps), label=f"f({q_min})")
    target = Real(lambda eps: params.variant.f_lower_target(n, eps), label="target")
    ok = compare(f_real, target) >= 0
    return FLowerBound(n, q_min, f_real.enclose(_EPS), target.enclose(_EPS), ok)
