"""Exact construction and certification of generalised Cantor sets."""

from .cantor_core import CantorSchedule, LevelCollection, build, intersect_schedules
from .certify import certify_nonempty, check_condition13, dimension_lower_bound, t_sequence
from .rigor import ClosedInterval, RationalEnclosure, Real

__version__ = "0.1.0"

__all__ = [
    "CantorSchedule",
    "ClosedInterval",
    "LevelCollection",
    "RationalEnclosure",
    "Real",
    "build",
    "certify_nonempty",
    "check_condition13",
    "dimension_lower_bound",
    "intersect_schedules",
    "t_sequence",
]
