"""Prompt rendering and round-trip parsing."""

import json

import pytest

from health_agent.goldens import REPLAY_FAMILIES, load_golden
from health_agent.prompts import (
    CONTEXT_CHAR_BUDGET,
    INSTRUCTIONS,
    ContextOverflow,
    build_prompt,
    parse_prompt_history,
    parse_prompt_sections,
    parse_prompt_user_details,
    render_prompt,
    render_tool_lines,
)
from health_agent.tools import load_default_registry
from health_agent.trajectory import state_to_entry


@pytest.fixture(scope="module")
def registry():
    return load_default_registry()


@pytest.fixture(scope="module")
def golden():
    return load_golden("general_booking")


class TestRendering:
    def test_sections_in_order(self, golden, registry):
        prompt = build_prompt("planner", golden, registry)
        positions = [prompt.index(f"[{name}]") for name in
                     ("role", "user_details", "tools", "history", "instruction")]
        assert positions == sorted(positions)

    def test_role_line(self, golden, registry):
        prompt = build_prompt("caller", golden, registry)
        role_section = parse_prompt_sections(prompt)["role"]
        assert role_section.startswith("caller agent")

    def test_instruction_matches_role(self, golden, registry):
        for role in ("planner", "caller"):
            prompt = build_prompt(role, golden, registry)
            assert parse_prompt_sections(prompt)["instruction"] == INSTRUCTIONS[role]

    def test_unknown_role_rejected(self, golden, registry):
        with pytest.raises(ValueError):
            build_prompt("oracle", golden, registry)

    def test_one_tool_line_per_tool_in_order(self, registry):
        lines = render_tool_lines(registry)
        assert [json.loads(line)["Name"] for line in lines] == list(registry.names)

    def test_deterministic(self, golden, registry):
        a = build_prompt("planner", golden, registry)
        b = build_prompt("planner", golden, registry)
        assert a == b

    def test_upto_limits_history(self, golden, registry):
        prompt = build_prompt("planner", golden, registry, upto=2)
        assert len(parse_prompt_history(prompt)) == 2

    def test_overflow_raised(self, golden, registry):
        with pytest.raises(ContextOverflow):
            build_prompt("planner", golden, registry, char_budget=100)

    def test_no_overflow_without_budget(self, golden, registry):
        prompt = build_prompt("planner", golden, registry, char_budget=None)
        assert len(prompt) > 100

    def test_default_budget_fits_goldens(self, registry):
        for name in REPLAY_FAMILIES:
            prompt = build_prompt("planner", load_golden(name), registry)
            assert len(prompt) <= CONTEXT_CHAR_BUDGET


class TestRoundTrip:
    def test_history_parses_back_to_entries(self, registry):
        for name in REPLAY_FAMILIES:
            golden = load_golden(name)
            prompt = build_prompt("planner", golden, registry)
            want = [state_to_entry(s) for s in golden.states]
            assert parse_prompt_history(prompt) == want

    def test_user_details_parse_back(self, golden, registry):
        prompt = build_prompt("planner", golden, registry)
        details = parse_prompt_user_details(prompt)
        assert details.to_dict() == golden.user_details.to_dict()

    def test_sections_survive_multiline_instruction(self, golden, registry):
        prompt = build_prompt("planner", golden, registry)
        sections = parse_prompt_sections(prompt)
        assert set(sections) == {"role", "user_details", "tools", "history",
                                 "instruction"}

    def test_render_prompt_counts_budget(self, golden, registry):
        lines = render_tool_lines(registry)
        text = render_prompt("planner", golden.user_details, lines, [],
                             char_budget=None)
        with pytest.raises(ContextOverflow):
            render_prompt("planner", golden.user_details, lines, [],
                          char_budget=len(text) - 1)
        assert render_prompt("planner", golden.user_details, lines, [],
                             char_budget=len(text)) == text
