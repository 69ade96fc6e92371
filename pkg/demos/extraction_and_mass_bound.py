"""Extract a local family from an adversarial build, spread a uniform measure and test mu(B) <= a|B|^s."""

import random
from fractions import Fraction

from cantorkit.cantor_core import CantorSchedule, build, greedy_adversary
from cantorkit.local_extract import (
    build_measure,
    check_conditions,
    dyadic_intervals,
    extract_local,
    verify_mdp_bound,
)
from cantorkit.rigor import ClosedInterval

schedule = CantorSchedule(ClosedInterval(0, 1), [8, 4, 8, 4, 8, 4],
                          {(0, 0): 2, (0, 1): 1, (1, 2): 2, (3, 3): 1, (2, 4): 4, (5, 5): 1})
depth = schedule.horizon
b = build(schedule, greedy_adversary("random", random.Random(3)), depth)
local, table = extract_local(b, schedule)
print("built counts    ", b.counts())
print("extracted counts", [len(level) for level in local])
print("condition violations:", check_conditions(table, b, schedule) or "none")

measure = build_measure(local)
s = Fraction(1, 2)
family = list(dyadic_intervals(schedule.root, local[-1].length))
report = verify_mdp_bound(measure, schedule, s, 0, family)
print(f"s = {s}: {report.checked} dyadic intervals, max ratio {report.max_ratio:.4f}, "
      f"{'holds' if report.passed else 'fails'}")
