"""Build a few schedules, certify them and compare the certified counts with adversarial builds."""

import random

from cantorkit.cantor_core import CantorSchedule, build, greedy_adversary, middle_rule
from cantorkit.certify import certify_nonempty, check_condition13
from cantorkit.rigor import ClosedInterval


def show(schedule, depth, rule):
    b = build(schedule, rule, depth)
    print(f"{schedule.name or 'custom'}: counts {b.counts()}")
    print(certify_nonempty(schedule, depth).report())
    print(check_condition13(schedule, depth).report())
    print()


show(CantorSchedule.middle_third(6), 6, middle_rule(1))
show(CantorSchedule.constant(4, 1, horizon=6), 6, greedy_adversary("cluster", random.Random(0)))

# an older stratum: every level-0 interval may lose up to 6 grandchildren in total
layered = CantorSchedule(ClosedInterval(0, 1), [5, 6, 5], {(0, 0): 1, (0, 1): 6, (2, 2): 1})
for order in ("left", "right", "cluster"):
    b = build(layered, greedy_adversary(order, random.Random(1)), 3)
    print(f"greedy-{order}: counts {b.counts()}")
cert = certify_nonempty(layered, 3)
print("certified lower bounds", [str(x) for x in cert.survivor_lower_bounds])
