"""Cantor-type witnesses for mixed Littlewood badly approximable sets."""

from .dsequence import DSequence
from .instance import (
    PROP1,
    PROP2,
    VARIANTS,
    InstanceParams,
    ParamsCertificate,
    Variant,
    big_F,
    budget,
    d_norm,
    f_value,
    height,
    level_R,
    littlewood_schedule,
    validate_params,
)
from .sieve import (
    BudgetViolation,
    FullState,
    InvalidParams,
    NodeCapExceeded,
    NoSurvivor,
    RationalCandidate,
    WitnessCertificate,
    WitnessState,
    build_full,
    build_level,
    delta_interval,
    enumerate_candidates,
    joint_witness,
    kill_range,
    witness,
)
from .verify import (
    check_counting_bounds,
    check_f_lower_bound,
    corrupt_onto,
    sieve_soundness,
    verify_witness,
)

__all__ = [
    "BudgetViolation", "DSequence", "FullState", "InstanceParams", "InvalidParams",
    "NoSurvivor", "NodeCapExceeded", "PROP1", "PROP2", "ParamsCertificate",
    "RationalCandidate", "VARIANTS", "Variant", "WitnessCertificate", "WitnessState",
    "big_F", "budget", "build_full", "build_level", "check_counting_bounds",
    "check_f_lower_bound", "corrupt_onto", "d_norm", "delta_interval",
    "enumerate_candidates", "f_value", "height", "joint_witness", "kill_range",
    "level_R", "littlewood_schedule", "sieve_soundness", "validate_params",
    "verify_witness", "witness",
]
