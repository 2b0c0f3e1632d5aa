"""Policy backends: scripted replay, HTTP delegation, and the rule engine."""

import json

import pytest
import requests

from health_agent import policies
from health_agent.goldens import load_golden
from health_agent.policies import (
    HttpPolicy,
    PolicyError,
    PolicyTimeout,
    RulePolicy,
    ScriptedPolicy,
    ScriptExhausted,
)
from health_agent.prompts import build_prompt
from health_agent.tools import load_default_registry
from health_agent.trajectory import (
    parse_caller_output,
    parse_planner_output,
    render_caller_output,
    render_planner_output,
)


@pytest.fixture(scope="module")
def registry():
    return load_default_registry()


class TestScriptedPolicy:
    def test_replays_roles_in_order(self, registry):
        golden = load_golden("soft_sos")
        policy = ScriptedPolicy(golden)
        planner = [s.payload for s in golden.states if s.kind == "planner"]
        caller = [s.payload for s in golden.states if s.kind == "caller"]
        assert policy.complete("", "planner") == render_planner_output(planner[0])
        assert policy.complete("", "caller") == render_caller_output(caller[0])
        assert policy.complete("", "planner") == render_planner_output(planner[1])

    def test_exhaustion(self):
        golden = load_golden("soft_sos")
        policy = ScriptedPolicy(golden)
        policy.complete("", "planner")
        policy.complete("", "planner")
        with pytest.raises(ScriptExhausted):
            policy.complete("", "planner")

    def test_unknown_role(self):
        policy = ScriptedPolicy(load_golden("soft_sos"))
        with pytest.raises(PolicyError):
            policy.complete("", "critic")


class TestHttpPolicy:
    def test_needs_endpoint(self, monkeypatch):
        monkeypatch.delenv("HA_MODEL_ENDPOINT", raising=False)
        with pytest.raises(ValueError):
            HttpPolicy()

    def test_endpoint_from_env(self, monkeypatch):
        monkeypatch.setenv("HA_MODEL_ENDPOINT", "http://model.local/v1")
        assert HttpPolicy().endpoint == "http://model.local/v1"

    def test_posts_prompt_and_role(self, monkeypatch):
        seen = {}

        class FakeResponse:
            def raise_for_status(self):
                pass

            def json(self):
                return {"text": "<reason>r</reason>\n<action>a</action>"}

        def fake_post(url, json=None, timeout=None):
            seen.update(url=url, payload=json, timeout=timeout)
            return FakeResponse()

        monkeypatch.setattr(policies.requests, "post", fake_post)
        policy = HttpPolicy(endpoint="http://model.local/v1", max_length=256)
        out = policy.complete("the prompt", "planner")
        assert out == "<reason>r</reason>\n<action>a</action>"
        assert seen["url"] == "http://model.local/v1"
        assert seen["payload"] == {"prompt": "the prompt", "role": "planner",
                                   "max_length": 256}

    def test_bare_string_reply(self, monkeypatch):
        class FakeResponse:
            def raise_for_status(self):
                pass

            def json(self):
                return "raw output"

        monkeypatch.setattr(policies.requests, "post",
                            lambda *a, **k: FakeResponse())
        assert HttpPolicy(endpoint="http://m").complete("p", "caller") == \
            "raw output"

    def test_missing_text_field(self, monkeypatch):
        class FakeResponse:
            def raise_for_status(self):
                pass

            def json(self):
                return {"output": "x"}

        monkeypatch.setattr(policies.requests, "post",
                            lambda *a, **k: FakeResponse())
        with pytest.raises(PolicyError):
            HttpPolicy(endpoint="http://m").complete("p", "planner")

    def test_timeout_maps_to_policy_timeout(self, monkeypatch):
        def fake_post(*a, **k):
            raise requests.Timeout("too slow")

        monkeypatch.setattr(policies.requests, "post", fake_post)
        with pytest.raises(PolicyTimeout):
            HttpPolicy(endpoint="http://m").complete("p", "planner")

    def test_connection_error_maps_to_policy_error(self, monkeypatch):
        def fake_post(*a, **k):
            raise requests.ConnectionError("refused")

        monkeypatch.setattr(policies.requests, "post", fake_post)
        with pytest.raises(PolicyError):
            HttpPolicy(endpoint="http://m").complete("p", "planner")


class TestRulePolicySosFidelity:
    """Prompted with any prefix of an SOS episode, the rules must continue
    it with the recorded next state, byte for byte."""

    @pytest.mark.parametrize("name", ["soft_sos", "hard_sos_start",
                                      "hard_sos_end"])
    def test_reproduces_golden_at_every_state(self, name, registry):
        golden = load_golden(name)
        policy = RulePolicy()
        for i, state in enumerate(golden.states):
            if state.kind == "planner":
                prompt = build_prompt("planner", golden, registry, upto=i)
                assert policy.complete(prompt, "planner") == \
                    render_planner_output(state.payload), f"{name} state {i}"
            elif state.kind == "caller":
                prompt = build_prompt("caller", golden, registry, upto=i)
                assert policy.complete(prompt, "caller") == \
                    render_caller_output(state.payload), f"{name} state {i}"

    def test_terminal_step_has_no_call(self, registry):
        golden = load_golden("soft_sos")
        prompt = build_prompt("caller", golden, registry,
                              upto=len(golden.states))
        with pytest.raises(PolicyError):
            RulePolicy().complete(prompt, "caller")


def booking_prompt(role, query, states_json=()):
    """A minimal rendered prompt with hand-written history lines."""
    history = [
        json.dumps({"from": "system", "value": {"user_details": {
            "user_id": "AAAA000001", "name": "Ana Torres",
            "timestamp": "2025-03-01T09:30:00"}}}),
        json.dumps({"from": "user", "value": query}),
    ]
    history.extend(json.dumps(entry) for entry in states_json)
    return "\n\n".join([
        f"[role]\n{role} agent",
        "[user_details]\n" + json.dumps({
            "user_id": "AAAA000001", "name": "Ana Torres",
            "timestamp": "2025-03-01T09:30:00"}),
        "[tools]\n{}",
        "[history]\n" + "\n".join(history),
        "[instruction]\nreply",
    ])


def entry(kind, value):
    return {"from": kind, "value": value}


class TestRulePolicyBooking:
    def test_opens_with_retrieval(self):
        prompt = booking_prompt("caller", "I have chest pain and palpitations.")
        call = parse_caller_output(RulePolicy().complete(prompt, "caller"))
        assert call.tool == "retrieve_past_complaints"
        assert call.parameters == {"user_id": "AAAA000001",
                                   "symptoms": "chest pain, palpitations"}

    def test_routes_specialization_from_symptoms(self):
        states = [
            entry("planner", {"reason": "r", "action": "a"}),
            entry("caller", {"tool": "retrieve_past_complaints",
                             "parameters": {"user_id": "AAAA000001",
                                            "symptoms": "chest pain"}}),
            entry("observation", {"result": []}),
        ]
        prompt = booking_prompt("caller", "I have chest pain and palpitations.",
                                states)
        call = parse_caller_output(RulePolicy().complete(prompt, "caller"))
        assert call.tool == "get_available_specialists"
        assert call.parameters["specialization"] == "cardiologist"

    def test_diet_symptoms_route_to_dietician(self):
        states = [
            entry("planner", {"reason": "r", "action": "a"}),
            entry("caller", {"tool": "retrieve_past_complaints",
                             "parameters": {"user_id": "AAAA000001",
                                            "symptoms": "bloating"}}),
            entry("observation", {"result": []}),
        ]
        prompt = booking_prompt(
            "caller", "Lots of bloating and heartburn, loss of appetite too.",
            states)
        call = parse_caller_output(RulePolicy().complete(prompt, "caller"))
        assert call.parameters["specialization"] == "dietician"

    def test_vague_complaint_asks_clarification(self):
        prompt = booking_prompt("caller", "I just feel wrong lately.")
        call = parse_caller_output(RulePolicy().complete(prompt, "caller"))
        assert call.tool == "get_input_from_user"
        assert call.parameters["questions"] == \
            "Could you describe your symptoms in more detail?"

    def test_clarified_symptoms_skip_retrieval(self):
        states = [
            entry("planner", {"reason": "r", "action": "a"}),
            entry("caller", {"tool": "get_input_from_user",
                             "parameters": {
                                 "user_id": "AAAA000001",
                                 "questions": "Could you describe your "
                                              "symptoms in more detail?"}}),
            entry("observation", {"result": {"user": "My joints hurt, "
                                             "lots of joint pain."}}),
        ]
        prompt = booking_prompt("caller", "I just feel wrong lately.", states)
        call = parse_caller_output(RulePolicy().complete(prompt, "caller"))
        assert call.tool == "get_available_specialists"
        assert call.parameters["symptoms"] == "joint pain"
        assert call.parameters["specialization"] == "rheumatologist"

    def test_offer_after_specialist_found(self):
        states = [
            entry("planner", {"reason": "r", "action": "a"}),
            entry("caller", {"tool": "retrieve_past_complaints",
                             "parameters": {"user_id": "AAAA000001",
                                            "symptoms": "chest pain"}}),
            entry("observation", {"result": []}),
            entry("planner", {"reason": "r", "action": "a"}),
            entry("caller", {"tool": "get_available_specialists",
                             "parameters": {"symptoms": "chest pain",
                                            "specialization": "cardiologist"}}),
            entry("observation", {"result": {
                "specialist_id": "RWQN120843",
                "name": "Dr. Aisha Khan (Cardiologist)",
                "available_slot": {"date": "2025-03-21",
                                   "time": "14:00-14:30"}}}),
        ]
        prompt = booking_prompt("caller", "I have chest pain.", states)
        call = parse_caller_output(RulePolicy().complete(prompt, "caller"))
        assert call.tool == "get_input_from_user"
        assert call.parameters["questions"] == (
            "Dr. Aisha Khan (Cardiologist) has an opening at 2:00 PM on "
            "March 21st. Would you like to schedule an appointment?")

    def test_planner_role_speaks_reason_action(self):
        prompt = booking_prompt("planner", "I have chest pain.")
        step = parse_planner_output(RulePolicy().complete(prompt, "planner"))
        assert "chest pain" in step.reason
        assert "retrieve_past_complaints" in step.action

    def test_no_user_query_rejected(self):
        prompt = "[role]\nplanner agent\n\n[user_details]\n" + json.dumps(
            {"user_id": "AAAA000001", "name": "A",
             "timestamp": "2025-03-01T09:30:00"}) + \
            "\n\n[history]\n\n\n[instruction]\nreply"
        with pytest.raises(PolicyError):
            RulePolicy().complete(prompt, "planner")
