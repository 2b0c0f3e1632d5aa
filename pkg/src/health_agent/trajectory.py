"""Trajectory data model: states, parsing, serialization, and tagged agent output.

A trajectory is the ordered record of one task episode: a system state with
user details, the user's query, then interleaved planner / caller /
observation states until the planner emits the ``<END>`` action.

The document format is JSON with a top-level ``interaction_trajectory`` list
(a bare state list is also accepted); each state is ``{"from": kind,
"value": payload}``. Unknown payload keys survive a parse/serialize round
trip untouched.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Iterator

END_ACTION = "<END>"

STATE_KINDS = ("system", "user", "planner", "caller", "observation")

USER_ID_RE = re.compile(r"^[A-Z]{4}[0-9]{6}$")

_IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class TrajectoryError(Exception):
    """Base class for trajectory parsing/validation failures."""


class MalformedDocument(TrajectoryError):
    """The document is not syntactically parseable."""


class SchemaViolation(TrajectoryError):
    """A state is missing required keys or uses an unknown kind."""


class OrderingViolation(TrajectoryError):
    """The state sequence breaks the episode grammar."""


class MissingTag(TrajectoryError):
    """A required tag is absent or unclosed in tagged agent output."""


class EmptyField(TrajectoryError):
    """A tagged field is present but empty."""


class MalformedParameters(TrajectoryError):
    """The caller's parameter block is not a valid unique-key object."""


@dataclass(frozen=True)
class UserDetails:
    user_id: str
    name: str
    timestamp: datetime
    extra: tuple = ()

    def __post_init__(self):
        if not USER_ID_RE.match(self.user_id):
            raise SchemaViolation(f"bad user_id format: {self.user_id!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "UserDetails":
        try:
            user_id = d["user_id"]
            name = d["name"]
            raw_ts = d["timestamp"]
        except (KeyError, TypeError) as exc:
            raise SchemaViolation(f"user_details missing key: {exc}") from exc
        try:
            ts = datetime.fromisoformat(raw_ts)
        except (ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad timestamp {raw_ts!r}") from exc
        extra = tuple((k, v) for k, v in d.items()
                      if k not in ("user_id", "name", "timestamp"))
        return cls(user_id=user_id, name=name, timestamp=ts, extra=extra)

    def to_dict(self) -> dict:
        d = {"user_id": self.user_id, "name": self.name,
             "timestamp": self.timestamp.isoformat()}
        d.update(dict(self.extra))
        return d


@dataclass(frozen=True)
class PlannerStep:
    """A reason/action pair; the episode is over when action is ``<END>``."""

    reason: str
    action: str

    @property
    def terminal(self) -> bool:
        return self.action == END_ACTION


@dataclass(frozen=True)
class ToolCall:
    tool: str
    parameters: dict

    def __post_init__(self):
        if not _IDENTIFIER_RE.match(self.tool):
            raise SchemaViolation(f"tool name is not an identifier: {self.tool!r}")


@dataclass
class State:
    """One trajectory state. ``payload`` depends on ``kind``:

    system -> {"user_details": UserDetails, **extra}
    user -> str
    planner -> PlannerStep (extra keys kept in ``extra``)
    caller -> ToolCall (extra keys kept in ``extra``)
    observation -> any JSON value (the tool result), under "result"
    """

    kind: str
    payload: Any
    extra: dict = field(default_factory=dict)

    @property
    def is_terminal_planner(self) -> bool:
        return self.kind == "planner" and self.payload.terminal


def _state_from_dict(d: Any, index: int) -> State:
    if not isinstance(d, dict):
        raise SchemaViolation(f"state {index} is not an object")
    if "from" not in d:
        raise SchemaViolation(f"state {index} missing 'from'")
    if "value" not in d:
        raise SchemaViolation(f"state {index} missing 'value'")
    kind = d["from"]
    value = d["value"]
    extra = {k: v for k, v in d.items() if k not in ("from", "value")}
    if kind not in STATE_KINDS:
        raise SchemaViolation(f"state {index} has unknown kind {kind!r}")

    if kind == "system":
        if not isinstance(value, dict) or "user_details" not in value:
            raise SchemaViolation(f"system state {index} lacks user_details")
        payload = {"user_details": UserDetails.from_dict(value["user_details"])}
        payload.update({k: v for k, v in value.items() if k != "user_details"})
    elif kind == "user":
        if not isinstance(value, str):
            raise SchemaViolation(f"user state {index} value must be a string")
        payload = value
    elif kind == "planner":
        if not isinstance(value, dict):
            raise SchemaViolation(f"planner state {index} value must be an object")
        reason = value.get("reason")
        action = value.get("action")
        if not isinstance(reason, str) or not reason.strip():
            raise SchemaViolation(f"planner state {index} has empty reason")
        if not isinstance(action, str) or not action.strip():
            raise SchemaViolation(f"planner state {index} has empty action")
        payload = PlannerStep(reason=reason, action=action)
        extra.update({k: v for k, v in value.items() if k not in ("reason", "action")})
    elif kind == "caller":
        if not isinstance(value, dict) or "tool" not in value:
            raise SchemaViolation(f"caller state {index} lacks tool")
        params = value.get("parameters", {})
        if not isinstance(params, dict):
            raise SchemaViolation(f"caller state {index} parameters must be an object")
        payload = ToolCall(tool=value["tool"], parameters=params)
        extra.update({k: v for k, v in value.items()
                      if k not in ("tool", "parameters")})
    else:  # observation
        if not isinstance(value, dict) or "result" not in value:
            raise SchemaViolation(f"observation state {index} lacks result")
        payload = value["result"]
        extra.update({k: v for k, v in value.items() if k != "result"})
    return State(kind=kind, payload=payload, extra=extra)


def _state_to_dict(s: State) -> dict:
    if s.kind == "system":
        value = {"user_details": s.payload["user_details"].to_dict()}
        value.update({k: v for k, v in s.payload.items() if k != "user_details"})
    elif s.kind == "user":
        value = s.payload
    elif s.kind == "planner":
        value = {"reason": s.payload.reason, "action": s.payload.action}
        value.update(s.extra)
        return {"from": s.kind, "value": value}
    elif s.kind == "caller":
        value = {"tool": s.payload.tool, "parameters": s.payload.parameters}
        value.update(s.extra)
        return {"from": s.kind, "value": value}
    else:
        value = {"result": s.payload}
        value.update(s.extra)
        return {"from": s.kind, "value": value}
    d = {"from": s.kind, "value": value}
    d.update(s.extra)
    return d


@dataclass
class Trajectory:
    states: list[State] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[State]:
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def user_details(self) -> UserDetails:
        return self.states[0].payload["user_details"]

    @property
    def is_complete(self) -> bool:
        return bool(self.states) and self.states[-1].is_terminal_planner

    def of_kind(self, kind: str) -> list[State]:
        return [s for s in self.states if s.kind == kind]

    def validate(self, strict: bool = False) -> None:
        """Check the episode grammar.

        Legal transitions: system -> (user|planner); user -> planner;
        planner -> caller unless terminal; caller -> observation (strict)
        or also planner (lenient, for corpus files that skipped an
        observation); observation -> planner. A ``user`` state may only
        appear right after ``system``, and ``<END>`` only as the final
        planner action.
        """
        if not self.states:
            raise SchemaViolation("empty trajectory")
        if self.states[0].kind != "system":
            raise OrderingViolation("first state must be 'system'")
        for i, s in enumerate(self.states[1:], start=1):
            prev = self.states[i - 1]
            if s.kind == "system":
                raise OrderingViolation(f"state {i}: duplicate system state")
            if s.kind == "user" and i != 1:
                raise OrderingViolation(
                    f"state {i}: user turns after the initial query must arrive "
                    "as get_input_from_user observations")
            if s.kind == "caller" and prev.kind != "planner":
                raise OrderingViolation(f"state {i}: caller not after planner")
            if s.kind == "observation" and prev.kind != "caller":
                raise OrderingViolation(f"state {i}: observation not after caller")
            if s.kind == "planner" and prev.kind not in ("system", "user", "observation", "caller"):
                raise OrderingViolation(f"state {i}: planner after {prev.kind}")
            if s.kind == "planner" and prev.kind == "caller" and strict:
                raise OrderingViolation(
                    f"state {i}: planner directly after caller (missing observation)")
            if prev.kind == "planner" and prev.payload.terminal:
                raise OrderingViolation(f"state {i}: states after <END>")
            if prev.kind == "planner" and s.kind != "caller":
                raise OrderingViolation(
                    f"state {i}: non-terminal planner must be followed by caller")

    def to_document(self) -> dict:
        return {"interaction_trajectory": [_state_to_dict(s) for s in self.states]}

    @classmethod
    def from_document(cls, doc: Any, strict: bool = False) -> "Trajectory":
        if isinstance(doc, dict):
            if "interaction_trajectory" not in doc:
                raise SchemaViolation("missing top-level 'interaction_trajectory'")
            raw_states = doc["interaction_trajectory"]
        elif isinstance(doc, list):
            raw_states = doc
        else:
            raise SchemaViolation("document must be an object or a state list")
        if not isinstance(raw_states, list):
            raise SchemaViolation("'interaction_trajectory' must be a list")
        t = cls([_state_from_dict(s, i) for i, s in enumerate(raw_states)])
        t.validate(strict=strict)
        return t


def parse_trajectory(text: str, strict: bool = False) -> Trajectory:
    """Parse a serialized trajectory document (or bare state list)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(str(exc)) from exc
    return Trajectory.from_document(doc, strict=strict)


def serialize_trajectory(t: Trajectory, indent: int | None = 2) -> str:
    return json.dumps(t.to_document(), indent=indent, ensure_ascii=False)


def state_to_entry(s: State) -> dict:
    """The document form of one state ({"from": ..., "value": ...})."""
    return _state_to_dict(s)


# -- helpers for building states ------------------------------------------

def system_state(user: UserDetails, **extra_payload) -> State:
    payload = {"user_details": user}
    payload.update(extra_payload)
    return State("system", payload)


def user_state(text: str) -> State:
    return State("user", text)


def planner_state(reason: str, action: str) -> State:
    return State("planner", PlannerStep(reason=reason, action=action))


def caller_state(tool: str, parameters: dict) -> State:
    return State("caller", ToolCall(tool=tool, parameters=parameters))


def observation_state(result: Any) -> State:
    return State("observation", result)


# -- tagged planner / caller output ----------------------------------------

_REASON_RE = re.compile(r"<reason>(.*?)</reason>", re.DOTALL)
_ACTION_RE = re.compile(r"<action>(.*?)</action>", re.DOTALL)
_TOOL_RE = re.compile(r"<tool>(.*?)</tool>", re.DOTALL)
# greedy so object literals containing '}' stay inside the block
_PARAMS_RE = re.compile(r"<parameters>(.*)</parameters>", re.DOTALL)


def parse_planner_output(text: str) -> PlannerStep:
    """Extract ``<reason>``/``<action>`` from tagged planner text."""
    m_reason = _REASON_RE.search(text)
    if m_reason is None:
        raise MissingTag("no <reason>...</reason> block")
    m_action = _ACTION_RE.search(text)
    if m_action is None:
        raise MissingTag("no <action>...</action> block")
    reason = m_reason.group(1).strip()
    action = m_action.group(1).strip()
    if not reason:
        raise EmptyField("empty reason")
    if not action:
        raise EmptyField("empty action")
    return PlannerStep(reason=reason, action=action)


def _reject_duplicate_keys(pairs):
    d = {}
    for k, v in pairs:
        if k in d:
            raise MalformedParameters(f"duplicate parameter {k!r}")
        d[k] = v
    return d


def parse_caller_output(text: str) -> ToolCall:
    """Extract ``<tool>``/``<parameters>`` from tagged caller text.

    The paper tags the function and its parameters without naming the tags;
    ``<tool>`` / ``<parameters>`` with a JSON object literal is this
    project's convention.
    """
    m_tool = _TOOL_RE.search(text)
    if m_tool is None:
        raise MissingTag("no <tool>...</tool> block")
    m_params = _PARAMS_RE.search(text)
    if m_params is None:
        raise MissingTag("no <parameters>...</parameters> block")
    tool = m_tool.group(1).strip()
    if not _IDENTIFIER_RE.match(tool):
        raise MissingTag(f"tool name missing or not an identifier: {tool!r}")
    raw = m_params.group(1).strip()
    try:
        params = json.loads(raw, object_pairs_hook=_reject_duplicate_keys)
    except MalformedParameters:
        raise
    except json.JSONDecodeError as exc:
        raise MalformedParameters(f"parameters are not valid JSON: {exc}") from exc
    if not isinstance(params, dict):
        raise MalformedParameters("parameters must be an object")
    return ToolCall(tool=tool, parameters=params)


def render_planner_output(step: PlannerStep) -> str:
    return f"<reason>{step.reason}</reason>\n<action>{step.action}</action>"


def render_caller_output(call: ToolCall) -> str:
    params = json.dumps(call.parameters, ensure_ascii=False)
    return f"<tool>{call.tool}</tool>\n<parameters>{params}</parameters>"
