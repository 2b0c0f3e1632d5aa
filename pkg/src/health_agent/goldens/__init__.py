"""Committed golden trajectories, one per task family.

``soft_sos_corpus`` is the as-published variant of ``soft_sos`` that skips
the observation after notify_user; it parses only in lenient mode and is
kept for parser coverage, not for replay.
"""

from importlib import resources
import json

from ..trajectory import Trajectory

REPLAY_FAMILIES = (
    "general_booking",
    "counter_questions",
    "booking_declined",
    "dietician_booking",
    "soft_sos",
    "hard_sos_start",
    "hard_sos_end",
)

ALL_GOLDENS = REPLAY_FAMILIES + ("soft_sos_corpus",)


def golden_text(name: str) -> str:
    if name not in ALL_GOLDENS:
        raise KeyError(f"unknown golden {name!r}")
    return (resources.files(__package__) / f"{name}.json").read_text(encoding="utf-8")


def golden_document(name: str) -> dict:
    return json.loads(golden_text(name))


def load_golden(name: str) -> Trajectory:
    strict = name != "soft_sos_corpus"
    return Trajectory.from_document(golden_document(name), strict=strict)
