"""Tool registry: schema loading, call validation, and premise shuffling.

The registry file uses the published field names (Name, Description,
Parameters, Required Parameters, Returns). The source list declares three
tools twice with conflicting required sets; the loader merges duplicates by
name, keeping first-occurrence order and the required set that matches how
the tools are actually called.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources

from .trajectory import ToolCall

# The duplicated source entries disagree on get_available_specialists'
# required list ([symptoms, user_schedule] vs [symptoms, specialization]);
# every recorded call passes symptoms + specialization.
_REQUIRED_OVERRIDES = {
    "get_available_specialists": ("symptoms", "specialization"),
}

# notify_user is called with key "symptoms" in the SOS episodes although its
# schema names the payload "message"; both are accepted, message canonical.
PARAM_ALIASES = {
    "notify_user": {"symptoms": "message"},
}

# Used in the SOS-end flow but absent from the published list.
_ASSIGNED_AMBULANCE_SPEC = {
    "Name": "get_assigned_ambulance",
    "Description": "Retrieves the ambulance assigned to the user's active SOS.",
    "Parameters": [
        {
            "param_name": "user_id",
            "type": "string",
            "default": "None",
            "description": "Unique identifier for the user.",
        }
    ],
    "Required Parameters": ["user_id"],
    "Returns": {
        "type": "dictionary",
        "description": "Returns the assigned ambulance details {ambulance_id: string, phone_no: string}.",
    },
}

_TYPE_CHECKS = {
    "string": lambda v: isinstance(v, str),
    "boolean": lambda v: isinstance(v, bool),
    "object": lambda v: isinstance(v, dict),
    "dictionary": lambda v: isinstance(v, dict),
    "array": lambda v: isinstance(v, list),
}


class RegistryError(Exception):
    """The registry document is malformed."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    default: str = "None"
    description: str = ""


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: tuple[ParamSpec, ...]
    required: tuple[str, ...]
    returns_type: str
    returns_description: str

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise RegistryError(f"{self.name}: duplicate parameter names")
        missing = set(self.required) - set(names)
        if missing:
            raise RegistryError(f"{self.name}: required but undeclared: {sorted(missing)}")

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def param(self, name: str) -> ParamSpec | None:
        for p in self.parameters:
            if p.name == name:
                return p
        return None

    def to_dict(self) -> dict:
        return {
            "Name": self.name,
            "Description": self.description,
            "Parameters": [
                {"param_name": p.name, "type": p.type, "default": p.default,
                 "description": p.description}
                for p in self.parameters
            ],
            "Required Parameters": list(self.required),
            "Returns": {"type": self.returns_type,
                        "description": self.returns_description},
        }


@dataclass(frozen=True)
class ValidationReport:
    tool_known: bool
    missing_required: tuple[str, ...] = ()
    unknown_params: tuple[str, ...] = ()
    type_mismatches: tuple[tuple[str, str, str], ...] = ()

    @property
    def ok(self) -> bool:
        return (self.tool_known and not self.missing_required
                and not self.unknown_params and not self.type_mismatches)

    def describe(self) -> str:
        if self.ok:
            return "valid call"
        parts = []
        if not self.tool_known:
            parts.append("unknown tool")
        if self.missing_required:
            parts.append(f"missing required parameters: {', '.join(self.missing_required)}")
        if self.unknown_params:
            parts.append(f"unknown parameters: {', '.join(self.unknown_params)}")
        for name, expected, got in self.type_mismatches:
            parts.append(f"parameter {name} expects {expected}, got {got}")
        return "; ".join(parts)


@dataclass
class ToolRegistry:
    """Ordered tool specs; order is the planner's premise order."""

    tools: list[ToolSpec] = field(default_factory=list)

    def __post_init__(self):
        self._by_name = {t.name: t for t in self.tools}
        if len(self._by_name) != len(self.tools):
            raise RegistryError("registry holds duplicate tool names")

    def __len__(self) -> int:
        return len(self.tools)

    def __iter__(self):
        return iter(self.tools)

    def lookup(self, name: str) -> ToolSpec | None:
        return self._by_name.get(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tools)


def _spec_from_entry(entry: dict) -> ToolSpec:
    try:
        params = tuple(
            ParamSpec(name=p["param_name"], type=p.get("type", "string"),
                      default=str(p.get("default", "None")),
                      description=p.get("description", ""))
            for p in entry.get("Parameters", [])
        )
        declared = {p.name for p in params}
        required = tuple(r for r in entry.get("Required Parameters", []) if r in declared)
        returns = entry.get("Returns", {})
        return ToolSpec(
            name=entry["Name"],
            description=entry.get("Description", "").strip(),
            parameters=params,
            required=required,
            returns_type=returns.get("type", "object"),
            returns_description=returns.get("description", "").strip(),
        )
    except (KeyError, TypeError) as exc:
        raise RegistryError(f"malformed tool entry: {exc}") from exc


def _merge(first: ToolSpec, other: ToolSpec) -> ToolSpec:
    params = list(first.parameters)
    seen = {p.name for p in params}
    for p in other.parameters:
        if p.name not in seen:
            params.append(p)
            seen.add(p.name)
    required = tuple(dict.fromkeys([*first.required, *other.required]))
    required = tuple(r for r in required if r in seen)
    return ToolSpec(first.name, first.description, tuple(params), required,
                    first.returns_type, first.returns_description)


def load_registry(text: str) -> ToolRegistry:
    """Parse a registry document, merging duplicate names in listed order."""
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RegistryError(f"registry is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise RegistryError("registry document must be a list of tools")
    merged: dict[str, ToolSpec] = {}
    for entry in entries:
        spec = _spec_from_entry(entry)
        if spec.name in merged:
            merged[spec.name] = _merge(merged[spec.name], spec)
        else:
            merged[spec.name] = spec
    tools = []
    for name, spec in merged.items():
        override = _REQUIRED_OVERRIDES.get(name)
        if override:
            spec = ToolSpec(spec.name, spec.description, spec.parameters,
                            override, spec.returns_type, spec.returns_description)
        tools.append(spec)
    return ToolRegistry(tools)


def load_default_registry() -> ToolRegistry:
    text = (resources.files("health_agent") / "data/tools.json").read_text(encoding="utf-8")
    reg = load_registry(text)
    tools = list(reg.tools)
    if reg.lookup("get_assigned_ambulance") is None:
        tools.append(_spec_from_entry(_ASSIGNED_AMBULANCE_SPEC))
    return ToolRegistry(tools)


def normalize_call(call: ToolCall, registry: ToolRegistry) -> ToolCall:
    """Fold accepted parameter aliases into their canonical names."""
    aliases = PARAM_ALIASES.get(call.tool)
    if not aliases or not any(k in call.parameters for k in aliases):
        return call
    params = {}
    for k, v in call.parameters.items():
        canonical = aliases.get(k, k)
        # an alias never overrides an explicitly passed canonical key
        if canonical in params or (canonical != k and canonical in call.parameters):
            params[k] = v
        else:
            params[canonical] = v
    return ToolCall(call.tool, params)


def validate_call(call: ToolCall, registry: ToolRegistry) -> ValidationReport:
    spec = registry.lookup(call.tool)
    if spec is None:
        return ValidationReport(tool_known=False)
    call = normalize_call(call, registry)
    declared = set(spec.param_names)
    given = set(call.parameters)
    missing = tuple(r for r in spec.required if r not in given)
    unknown = tuple(sorted(given - declared))
    mismatches = []
    for name in sorted(given & declared):
        check = _TYPE_CHECKS.get(spec.param(name).type)
        value = call.parameters[name]
        if check is not None and not check(value):
            mismatches.append((name, spec.param(name).type, type(value).__name__))
    return ValidationReport(tool_known=True, missing_required=missing,
                            unknown_params=unknown,
                            type_mismatches=tuple(mismatches))


def shuffle_tools(registry: ToolRegistry, seed: int) -> ToolRegistry:
    """Permute premise order deterministically; same seed, same order."""
    tools = list(registry.tools)
    random.Random(seed).shuffle(tools)
    return ToolRegistry(tools)
