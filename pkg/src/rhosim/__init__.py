"""Frequency-based probability: partitioned experiments, stabilization tests, classical checks."""

from rhosim.core import (
    ContinuousSpace,
    DiscreteSpace,
    OutOfSupport,
    Part,
    RhoSystem,
    TrialRecord,
    TrialRecords,
    run_trial,
    run_trials,
)
from rhosim.streams import SeedSpec, TrialStreams, derive_trial_stream

__version__ = "0.1.0"

__all__ = [
    "ContinuousSpace",
    "DiscreteSpace",
    "OutOfSupport",
    "Part",
    "RhoSystem",
    "SeedSpec",
    "TrialRecord",
    "TrialRecords",
    "TrialStreams",
    "derive_trial_stream",
    "run_trial",
    "run_trials",
]
