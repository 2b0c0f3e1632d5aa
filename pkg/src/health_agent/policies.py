"""Decision backends for the planner and caller agents.

A policy receives the rendered prompt and produces the raw tagged output
for the requested role. Three backends cover the runtime spectrum: a
scripted replayer for regression against recorded episodes, an HTTP
client for a hosted model, and a deterministic rule engine that drives
the built-in task flows without any model at all.
"""

from __future__ import annotations

import os
from typing import Protocol

import requests

from . import diseases, flows, health
from .flows import FlowStep
from .memory import extract_entities
from .prompts import parse_prompt_history, parse_prompt_user_details
from .trajectory import (PlannerStep, ToolCall, UserDetails,
                         render_caller_output, render_planner_output)


class PolicyError(Exception):
    """The policy cannot produce an output for this prompt."""


class PolicyTimeout(PolicyError):
    """The model endpoint did not answer in time."""


class ScriptExhausted(PolicyError):
    """The scripted episode has no output left for this role."""


class PolicyBackend(Protocol):
    def complete(self, prompt: str, role: str) -> str: ...


class ScriptedPolicy:
    """Replays the agent outputs recorded in a reference trajectory."""

    def __init__(self, trajectory):
        self._planner = [s.payload for s in trajectory.states
                         if s.kind == "planner"]
        self._caller = [s.payload for s in trajectory.states
                        if s.kind == "caller"]
        self._next_planner = 0
        self._next_caller = 0

    def complete(self, prompt: str, role: str) -> str:
        if role == "planner":
            if self._next_planner >= len(self._planner):
                raise ScriptExhausted("no scripted planner output left")
            step = self._planner[self._next_planner]
            self._next_planner += 1
            return render_planner_output(step)
        if role == "caller":
            if self._next_caller >= len(self._caller):
                raise ScriptExhausted("no scripted caller output left")
            call = self._caller[self._next_caller]
            self._next_caller += 1
            return render_caller_output(call)
        raise PolicyError(f"unknown role {role!r}")


class HttpPolicy:
    """Delegates decisions to a hosted model endpoint.

    The endpoint takes {"prompt", "role", "max_length"} and answers either
    a JSON object with a "text" field or a bare JSON string.
    """

    def __init__(self, endpoint: str | None = None, timeout: float = 30.0,
                 max_length: int = 512):
        self.endpoint = endpoint or os.environ.get("HA_MODEL_ENDPOINT", "")
        if not self.endpoint:
            raise ValueError(
                "a model endpoint is required (set HA_MODEL_ENDPOINT)")
        self.timeout = timeout
        self.max_length = max_length

    def complete(self, prompt: str, role: str) -> str:
        try:
            resp = requests.post(
                self.endpoint,
                json={"prompt": prompt, "role": role,
                      "max_length": self.max_length},
                timeout=self.timeout)
            resp.raise_for_status()
        except requests.Timeout as exc:
            raise PolicyTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise PolicyError(str(exc)) from exc
        data = resp.json()
        if isinstance(data, dict):
            if "text" not in data:
                raise PolicyError("endpoint reply has no 'text' field")
            return data["text"]
        return str(data)


_CLARIFY_ROUNDS = (
    ("The complaint is too vague to route to a specialist, so a clarifying "
     "question is needed.",
     "Ask the user to describe the symptoms in more detail.",
     "Could you describe your symptoms in more detail?"),
    ("The complaint is still unclear, so one more clarifying question is "
     "needed.",
     "Ask the user how long the symptoms have lasted and whether they are "
     "getting worse.",
     "How long have you been feeling this way, and has it been getting worse?"),
)

_FALLBACK_AMBULANCE = {"ambulance_id": "", "phone_no": ""}


def _ordered_symptoms(text: str) -> list[str]:
    found: list[str] = []
    for surface, label in extract_entities(text):
        low = surface.lower()
        if label == "SYMPTOM" and low not in found:
            found.append(low)
    return found


class RulePolicy:
    """Deterministic planner and caller rules for the built-in flows.

    Each turn it reads the episode history back out of the prompt, works
    out the next flow step, and speaks it in the requested role. SOS
    requests follow their fixed sequences; everything else is handled as
    an appointment-booking conversation.
    """

    def complete(self, prompt: str, role: str) -> str:
        history = parse_prompt_history(prompt)
        user = parse_prompt_user_details(prompt)
        step = self._next_step(history, user)
        if role == "planner":
            return render_planner_output(PlannerStep(step.reason, step.action))
        if role == "caller":
            if step.tool is None:
                raise PolicyError("terminal step has no tool call")
            return render_caller_output(ToolCall(step.tool, step.parameters))
        raise PolicyError(f"unknown role {role!r}")

    # -- history digestion

    @staticmethod
    def _query(history: list[dict]) -> str:
        for entry in history:
            if entry.get("from") == "user":
                value = entry.get("value")
                if isinstance(value, dict):
                    return str(value.get("user", ""))
                return str(value)
        raise PolicyError("no user query in history")

    @staticmethod
    def _pairs(history: list[dict]) -> list[tuple[str, dict, object]]:
        """(tool, parameters, observation) for each completed call."""
        pairs = []
        pending = None
        for entry in history:
            kind = entry.get("from")
            if kind == "caller":
                value = entry["value"]
                pending = (value["tool"], value.get("parameters", {}))
            elif kind == "observation" and pending is not None:
                pairs.append((*pending, entry["value"].get("result")))
                pending = None
        return pairs

    @staticmethod
    def _last_obs(pairs, tool: str):
        for name, _params, obs in reversed(pairs):
            if name == tool:
                return obs
        return None

    def _next_step(self, history: list[dict], user: UserDetails) -> FlowStep:
        query = self._query(history)
        pairs = self._pairs(history)
        idx = len(pairs)
        if query.startswith("Soft SOS triggered"):
            return self._soft_sos(query, user, idx)
        if query.startswith("Hard SOS triggered"):
            return self._hard_sos_start(user, pairs, idx)
        if query.startswith("End SOS triggered"):
            return self._hard_sos_end(user, pairs, idx)
        return self._booking(query, user, pairs)

    # -- fixed sequences

    def _soft_sos(self, query: str, user: UserDetails, idx: int) -> FlowStep:
        try:
            vitals = health.parse_soft_sos_query(query)
            alert = health.soft_sos_alert_text(vitals["heart_rate"],
                                               vitals["oxygen"])
        except (ValueError, KeyError) as exc:
            raise PolicyError(f"unreadable soft-SOS query: {exc}") from exc
        seq = flows.soft_sos_sequence(user.user_id, alert)
        return seq[min(idx, len(seq) - 1)]

    def _hard_sos_start(self, user: UserDetails, pairs, idx: int) -> FlowStep:
        location = self._last_obs(pairs, "get_location") or {}
        ambulance = (self._last_obs(pairs, "search_ambulance")
                     or _FALLBACK_AMBULANCE)
        seq = flows.hard_sos_start_sequence(user.user_id, user.name,
                                            location, ambulance)
        return seq[min(idx, len(seq) - 1)]

    def _hard_sos_end(self, user: UserDetails, pairs, idx: int) -> FlowStep:
        ambulance = (self._last_obs(pairs, "get_assigned_ambulance")
                     or _FALLBACK_AMBULANCE)
        seq = flows.hard_sos_end_sequence(user.user_id, user.name, ambulance)
        return seq[min(idx, len(seq) - 1)]

    # -- booking conversation

    def _booking(self, query: str, user: UserDetails, pairs) -> FlowStep:
        user_id = user.user_id
        timestamp = user.timestamp.isoformat()

        offer_i = None
        clarify_count = 0
        replies: list[object] = []
        for i, (tool, params, obs) in enumerate(pairs):
            if tool != "get_input_from_user":
                continue
            if str(params.get("questions", "")).endswith(
                    "schedule an appointment?"):
                offer_i = i
            else:
                clarify_count += 1
                replies.append(obs)

        symptoms = _ordered_symptoms(query)
        for reply in replies:
            text = reply.get("user", "") if isinstance(reply, dict) else str(reply)
            for phrase in _ordered_symptoms(text):
                if phrase not in symptoms:
                    symptoms.append(phrase)

        if symptoms:
            symptom_text = ", ".join(symptoms)
            specialization = diseases.specialization_for_symptoms(symptoms)
        else:
            symptom_text = query.strip()
            specialization = "general physician"

        tools_called = [tool for tool, _p, _o in pairs]
        if "get_available_specialists" not in tools_called:
            if not symptoms and clarify_count < len(_CLARIFY_ROUNDS):
                reason, action, question = _CLARIFY_ROUNDS[clarify_count]
                return flows.clarify_step(user_id, reason, action, question)
            if clarify_count == 0 and "retrieve_past_complaints" not in tools_called:
                reason = (f"User reports {symptom_text}. Past complaints may "
                          "hold related history.")
                return flows.retrieve_step(user_id, symptom_text, reason)
            if "retrieve_past_complaints" in tools_called:
                records = self._last_obs(pairs, "retrieve_past_complaints") or []
                lead = ("Past records show related complaints and the current "
                        "symptoms need attention." if records else
                        "No related past complaints were found.")
            else:
                lead = ("The answers describe the complaint clearly enough "
                        "to choose a specialist.")
            return flows.search_step(symptom_text, specialization,
                                     flows.search_reason(lead, specialization))

        specialist = self._last_obs(pairs, "get_available_specialists")
        if not specialist:
            # nobody to offer; keep the record and close out
            tail = flows.booking_tail(user_id, symptom_text, {}, False, timestamp)
            done = sum(1 for tool in tools_called
                       if tool in ("store_symptoms", "notify_user"))
            return tail[min(done, len(tail) - 1)]

        if offer_i is None:
            return flows.offer_step(user_id, specialist)

        answer = pairs[offer_i][2]
        accept = flows.is_acceptance(answer)
        tail = flows.booking_tail(user_id, symptom_text, specialist, accept,
                                  timestamp)
        done = len(pairs) - offer_i - 1
        return tail[min(done, len(tail) - 1)]
