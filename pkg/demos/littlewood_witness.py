"""Validate the constants, build a depth-3 witness chain and check it independently.

Takes around ten seconds.
"""

from fractions import Fraction

from cantorkit.littlewood import PROP1, DSequence, InstanceParams, validate_params
from cantorkit.littlewood.sieve import witness
from cantorkit.littlewood.verify import check_counting_bounds, sieve_soundness, verify_witness

R, c1, c = 1 << 18, Fraction(1, 1 << 27), Fraction(1, 1 << 80)
print(validate_params(R, c1, c).report())

params = InstanceParams(R, c1, c, PROP1, DSequence.constant(2))
cert = witness(params, 3)
for step in cert.steps:
    print(f"step {step.n}: {step.candidates[0]} candidates, {step.combined_kills} cells removed, "
          f"budget {step.budgets[0]:.2f}")
print("final interval", cert.final)
print("counting bounds", "hold" if check_counting_bounds(cert).passed else "fail")
print(verify_witness(cert, 10 ** 5).report())
sound = sieve_soundness(cert)
print(f"soundness: {sound.checked} denominators, {len(sound.inner_hits)} inner hits, "
      f"{'pass' if sound.passed else 'fail'}")
