"""Regression replay of recorded episodes.

A replay seeds a fresh world from the episode itself, re-runs the session
loop with the recorded agent outputs, and demands the same states back.
Any drift in prompts, validation, or world semantics shows up as a
divergence at a specific state index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .goldens import REPLAY_FAMILIES, load_golden
from .policies import ScriptedPolicy
from .session import AWAITING_USER, COMPLETE, run_session
from .trajectory import Trajectory, state_to_entry
from .world import derive_world_from_trajectory


@dataclass
class ReplayResult:
    name: str
    ok: bool
    divergence: int | None = None
    message: str = ""

    def describe(self) -> str:
        status = "ok" if self.ok else "FAIL"
        tail = f" ({self.message})" if self.message else ""
        return f"{self.name}: {status}{tail}"


def replay_trajectory(reference: Trajectory, name: str = "episode") -> ReplayResult:
    world = derive_world_from_trajectory(reference)
    policy = ScriptedPolicy(reference)
    outcome = run_session(query=reference.states[1].payload,
                          user_details=reference.user_details,
                          world=world, planner=policy)
    want = [state_to_entry(s) for s in reference.states]
    got = [state_to_entry(s) for s in outcome.trajectory.states]
    for i, (a, b) in enumerate(zip(got, want)):
        if a != b:
            return ReplayResult(name, False, divergence=i,
                                message=f"state {i} diverged: got {a!r}, "
                                        f"wanted {b!r}")
    if len(got) != len(want):
        short = min(len(got), len(want))
        return ReplayResult(name, False, divergence=short,
                            message=f"length mismatch: got {len(got)} states, "
                                    f"wanted {len(want)}")
    if outcome.status not in (COMPLETE, AWAITING_USER):
        return ReplayResult(name, False, divergence=len(want),
                            message=f"session ended {outcome.status}: "
                                    f"{outcome.failure}")
    return ReplayResult(name, True)


def replay_families(names: tuple[str, ...] = REPLAY_FAMILIES) -> list[ReplayResult]:
    return [replay_trajectory(load_golden(name), name=name) for name in names]


def replay_file(path: str | Path) -> list[ReplayResult]:
    """Replay a file holding one document, an array, or JSONL lines."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        docs = json.loads(text)
    except ValueError:
        docs = [json.loads(line) for line in text.splitlines() if line.strip()]
    if isinstance(docs, dict):
        docs = [docs]
    results = []
    for i, doc in enumerate(docs):
        reference = Trajectory.from_document(doc)
        results.append(replay_trajectory(reference, name=f"{path}[{i}]"))
    return results
