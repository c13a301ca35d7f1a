"""Exact-arithmetic simulation and verification of preemptive single-machine
flow-time scheduling under partial clairvoyance.

Every time instant, work amount and signal fraction is a ``fractions.Fraction``;
floating point appears only in report formatting.
"""

from .model import (
    AdversaryScript,
    Deferred,
    ExecutionSegment,
    Instance,
    Job,
    ModelError,
    ProgressScaledRule,
    RankPairRule,
    ScheduleTrace,
    Trigger,
    UnknownJobError,
    UnresolvedProcError,
    instance_from_json,
    instance_to_json,
    load_instance,
    save_instance,
)
from .policies import PolicyKind, RateDecision
from .engine import EngineError, CommitmentError, EventLog, simulate, replay_check

__all__ = [
    "AdversaryScript",
    "CommitmentError",
    "Deferred",
    "EngineError",
    "EventLog",
    "ExecutionSegment",
    "Instance",
    "Job",
    "ModelError",
    "PolicyKind",
    "ProgressScaledRule",
    "RankPairRule",
    "RateDecision",
    "ScheduleTrace",
    "Trigger",
    "UnknownJobError",
    "UnresolvedProcError",
    "instance_from_json",
    "instance_to_json",
    "load_instance",
    "replay_check",
    "save_instance",
    "simulate",
]
