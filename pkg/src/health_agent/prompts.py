"""Prompt rendering shared by the live session loop and dataset export.

Both agents see the same layout: role line, user details, the tool list
(one JSON line per tool, in registry order), the episode history so far
(one JSON line per state), and a role instruction. A single renderer keeps
training pairs and runtime prompts byte-identical.
"""

from __future__ import annotations

import json

from .tools import ToolRegistry
from .trajectory import State, Trajectory, UserDetails, state_to_entry

PROMPT_VERSION = "prompt/v1"

# target model context is 4,096 tokens; budgeted at 4 chars per token
CONTEXT_CHAR_BUDGET = 4096 * 4

INSTRUCTIONS = {
    "planner": (
        "Decide the next step toward completing the user's request.\n"
        "Reply with exactly two tagged fields:\n"
        "<reason>why this step is needed</reason>\n"
        "<action>what to do next</action>\n"
        "When the task is finished, reply with <END> inside the action tag."
    ),
    "caller": (
        "Translate the planner's latest action into one tool call.\n"
        "Reply with exactly two tagged fields:\n"
        "<tool>tool_name</tool>\n"
        "<parameters>{\"param\": \"value\"}</parameters>"
    ),
}


class ContextOverflow(Exception):
    """The rendered prompt exceeds the model context budget."""


def render_tool_line(spec) -> str:
    return json.dumps(spec.to_dict(), ensure_ascii=False)


def render_tool_lines(registry: ToolRegistry) -> list[str]:
    return [render_tool_line(spec) for spec in registry]


def render_state_line(state: State) -> str:
    return json.dumps(state_to_entry(state), ensure_ascii=False)


def render_prompt(role: str, user_details: UserDetails, tool_lines: list[str],
                  history_lines: list[str],
                  char_budget: int = CONTEXT_CHAR_BUDGET) -> str:
    if role not in INSTRUCTIONS:
        raise ValueError(f"unknown role {role!r}")
    prompt = "\n\n".join([
        f"[role]\n{role} agent, health assistant ({PROMPT_VERSION})",
        "[user_details]\n" + json.dumps(user_details.to_dict(), ensure_ascii=False),
        "[tools]\n" + "\n".join(tool_lines),
        "[history]\n" + "\n".join(history_lines),
        "[instruction]\n" + INSTRUCTIONS[role],
    ])
    if char_budget is not None and len(prompt) > char_budget:
        raise ContextOverflow(
            f"prompt is {len(prompt)} chars, budget {char_budget}")
    return prompt


def build_prompt(role: str, trajectory: Trajectory, registry: ToolRegistry,
                 upto: int | None = None,
                 char_budget: int = CONTEXT_CHAR_BUDGET) -> str:
    """Prompt for predicting the state at index ``upto`` (default: the next)."""
    states = trajectory.states if upto is None else trajectory.states[:upto]
    return render_prompt(role, trajectory.user_details,
                         render_tool_lines(registry),
                         [render_state_line(s) for s in states],
                         char_budget=char_budget)


def parse_prompt_sections(prompt: str) -> dict[str, str]:
    """Split a rendered prompt back into its bracketed sections."""
    sections: dict[str, str] = {}
    current: str | None = None
    buf: list[str] = []
    for line in prompt.split("\n"):
        if line.startswith("[") and line.endswith("]") and len(line) > 2:
            if current is not None:
                sections[current] = "\n".join(buf).strip("\n")
            current = line[1:-1]
            buf = []
        else:
            buf.append(line)
    if current is not None:
        sections[current] = "\n".join(buf).strip("\n")
    return sections


def parse_prompt_history(prompt: str) -> list[dict]:
    """The [history] entries of a rendered prompt, as document dicts."""
    history = parse_prompt_sections(prompt).get("history", "")
    return [json.loads(line) for line in history.split("\n") if line.strip()]


def parse_prompt_user_details(prompt: str) -> UserDetails:
    raw = parse_prompt_sections(prompt).get("user_details", "{}")
    return UserDetails.from_dict(json.loads(raw))
