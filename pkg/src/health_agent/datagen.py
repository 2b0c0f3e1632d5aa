"""Synthetic episode factory: generate, enhance, verify, interleave.

Generation fills per-family skeletons with sampled diseases, symptoms,
schedules, and vitals, yielding complete valid trajectories offline.
Enhancement re-randomizes surface entities (names, ids, phones, dates,
times) consistently across an episode while keeping its temporal story
intact. Verification checks structure, call schemas, temporal rules, and
family shape. Interleaving slices a trajectory into per-state training
samples with freshly shuffled tool lists.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from random import Random
from typing import Callable, Iterable

from . import flows, health
from .diseases import DIETICIAN_SYMPTOMS, DISEASES, sample_symptoms, specialization_for
from .memory import match_complaints
from .prompts import INSTRUCTIONS, PROMPT_VERSION, render_tool_lines
from .tools import ToolRegistry, load_default_registry, validate_call
from .trajectory import (
    Trajectory,
    TrajectoryError,
    UserDetails,
    caller_state,
    observation_state,
    planner_state,
    render_caller_output,
    render_planner_output,
    state_to_entry,
    system_state,
    user_state,
)

FAMILIES = ("general", "counter", "negative", "dietician",
            "soft_sos", "hard_sos_start", "hard_sos_end")

BOOKING_FAMILIES = ("general", "counter", "negative", "dietician")

SOS_TOOL_SEQUENCES = {
    "soft_sos": ("notify_user",),
    "hard_sos_start": ("notify_user", "get_location", "search_ambulance",
                       "send_message", "send_message", "notify_user"),
    "hard_sos_end": ("notify_user", "get_assigned_ambulance", "send_message",
                     "send_message", "notify_user"),
}


class PatternMiss(Exception):
    """An entity class the enhancer expected is absent from the episode."""


class BackendFailure(Exception):
    """The generation backend returned something unusable."""


FIRST_NAMES = (
    "Rosa", "Diego", "Maria", "Gabriel", "Aisha", "Elena", "Amit", "Lena",
    "Omar", "Priya", "Hugo", "Ines", "Tariq", "Sofia", "Mateo", "Hana",
    "Ravi", "Clara", "Yusuf", "Greta", "Nina", "Pablo", "Mei", "Anton",
)

LAST_NAMES = (
    "Diaz", "Arroyo", "Santos", "Lopez", "Khan", "Petrova", "Shah", "Park",
    "Haddad", "Iyer", "Moreau", "Costa", "Aziz", "Rossi", "Vargas", "Kato",
    "Menon", "Weber", "Demir", "Larsen", "Novak", "Silva", "Chen", "Volkov",
)

VAGUE_OPENERS = (
    "I've been having some trouble with my movement lately.",
    "I just haven't been feeling like myself lately.",
    "Something feels wrong with my body these days.",
    "I can't quite describe it, but I haven't felt well all week.",
)

QUERY_TEMPLATES = (
    "I've been dealing with {symptoms} for the past few days.",
    "Lately I've had {symptoms}, and it's starting to worry me.",
    "I've been feeling unwell with {symptoms} and it's getting worse.",
    "For about a week now I've had {symptoms}.",
)

DIET_QUERY_TEMPLATES = (
    "I've been dealing with {symptoms} these days.",
    "After most meals I get {symptoms}, and it's been weeks now.",
    "I've been struggling with {symptoms} no matter what I eat.",
)


def _rng(*parts) -> Random:
    return Random(":".join(str(p) for p in parts))


def _fresh_user_id(rng: Random) -> str:
    letters = "".join(rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ") for _ in range(4))
    return letters + f"{rng.randrange(1_000_000):06d}"


def _fresh_phone(rng: Random) -> str:
    return "+" + "".join(rng.choice("0123456789") for _ in range(rng.randint(10, 12)))


def _fresh_name(rng: Random) -> str:
    return f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}"


def _fresh_ambulance(rng: Random) -> dict:
    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
    suffix = "".join(rng.choice(alphabet) for _ in range(4))
    return {"ambulance_id": f"AMB{suffix}", "phone_no": _fresh_phone(rng)}


def _system_moment(rng: Random) -> datetime:
    day = date(2023, 1, 1) + timedelta(days=rng.randrange(880))
    return datetime.combine(day, time(rng.randint(6, 21), rng.randrange(60)))


def _slot(rng: Random, system: datetime, window_days: int = 90) -> dict:
    slot_date = system.date() + timedelta(days=rng.randint(1, window_days))
    start = time(rng.randint(9, 16), rng.choice((0, 30)))
    end = (datetime.combine(slot_date, start) + timedelta(minutes=30)).time()
    return {"date": slot_date.isoformat(),
            "time": f"{start:%H:%M}-{end:%H:%M}"}


def _prose_list(items: list[str]) -> str:
    if len(items) == 1:
        return items[0]
    if len(items) == 2:
        return f"{items[0]} and {items[1]}"
    return ", ".join(items[:-1]) + f", and {items[-1]}"


def _title(specialization: str) -> str:
    return " ".join(w if w.isupper() else w.capitalize()
                    for w in specialization.split())


def _specialist(rng: Random, specialization: str, system: datetime,
                window_days: int = 90) -> dict:
    return {
        "specialist_id": _fresh_user_id(rng),
        "name": f"Dr. {_fresh_name(rng)} ({_title(specialization)})",
        "available_slot": _slot(rng, system, window_days),
    }


def _past_records(rng: Random, symptoms: list[str], system: datetime) -> list[dict]:
    count = rng.choice((0, 1, 1, 2))
    records = []
    days_back = 0
    for _ in range(count):
        days_back += rng.randint(20, 160)
        when = system.date() - timedelta(days=days_back)
        shared = rng.choice(symptoms)
        text = rng.choice((f"mild {shared}", f"occasional {shared}",
                           f"slight {shared}"))
        records.append({"date": when.isoformat(), "symptoms": text})
    return records


def _assemble(user: UserDetails, query, steps: list[flows.FlowStep],
              observations: list) -> Trajectory:
    states = [system_state(user), user_state(query)]
    obs = iter(observations)
    for step in steps:
        states.append(planner_state(step.reason, step.action))
        if step.tool is not None:
            states.append(caller_state(step.tool, step.parameters))
            states.append(observation_state(next(obs)))
    trajectory = Trajectory(states)
    trajectory.validate()
    return trajectory


# -- per-family skeletons -----------------------------------------------------

def _booking_episode(family: str, rng: Random) -> Trajectory:
    user = UserDetails(user_id=_fresh_user_id(rng), name=_fresh_name(rng),
                       timestamp=_system_moment(rng))
    if family == "dietician":
        disease = None
        specialization = "dietician"
        symptoms = rng.sample(list(DIETICIAN_SYMPTOMS), rng.randint(2, 3))
        query = rng.choice(DIET_QUERY_TEMPLATES).format(
            symptoms=_prose_list(symptoms))
        report = (f"User reports {_prose_list(symptoms)} which could be "
                  "diet related.")
    else:
        disease = rng.choice(DISEASES)
        specialization = specialization_for(disease)
        symptoms = sample_symptoms(disease, rng, rng.randint(2, 3))
        query = rng.choice(QUERY_TEMPLATES).format(
            symptoms=_prose_list(symptoms))
        report = (f"User reports {_prose_list(symptoms)} which could "
                  f"indicate {disease}.")

    symptom_text = ", ".join(symptoms)
    accept = family != "negative"
    specialist = _specialist(rng, specialization, user.timestamp)
    observations: list = []
    clarifications = None

    if family == "counter":
        query = rng.choice(VAGUE_OPENERS)
        first, second = symptoms[0], symptoms[1]
        clarifications = [
            ("User reports a vague complaint, so the actual symptoms need "
             "to be clarified first.",
             "Ask the user to describe the symptoms in more detail.",
             "Could you describe your symptoms in more detail?"),
            (f"The user mentions {first}, but a fuller picture is needed "
             "before choosing a specialist.",
             "Ask whether anything else has come up or whether it is "
             "getting worse.",
             "Is there anything else you've noticed, or has it been "
             "getting worse?"),
        ]
        symptom_text = ", ".join(symptoms[:2])
        records_lead = (f"{first.capitalize()} together with {second} points "
                        "to a clear complaint.")
        observations.append({"user": f"I've noticed {first} on and off for "
                                     "a while now."})
        observations.append({"user": f"There's also some {second}, and it "
                                     "does seem to be getting worse."})
    else:
        records = _past_records(rng, symptoms, user.timestamp)
        matched = match_complaints(records, symptom_text)
        observations.append(matched)
        if matched:
            summary = " and ".join(r["symptoms"] for r in matched)
            records_lead = (f"Past records show {summary}, but the current "
                            "symptoms are more severe.")
        else:
            records_lead = "No related past complaints were found."

    observations.append(specialist)
    observations.append(flows.ACCEPT_REPLY if accept else flows.DECLINE_REPLY)
    observations.extend([True, True, True, True] if accept else [True, True])

    steps = flows.booking_sequence(
        user.user_id, symptom_text, specialization, specialist, accept,
        user.timestamp.isoformat(), report, records_lead,
        clarifications=clarifications)
    return _assemble(user, query, steps, observations)


def _soft_sos_episode(rng: Random) -> Trajectory:
    user = UserDetails(user_id=_fresh_user_id(rng), name=_fresh_name(rng),
                       timestamp=_system_moment(rng))
    heart_rate = rng.choice((rng.randint(35, 55), rng.randint(105, 150)))
    oxygen = rng.randint(80, 93)
    sleep = None
    if rng.random() < 0.5:
        sleep = {"deep": rng.randint(40, 120), "light": rng.randint(150, 300),
                 "rem": rng.randint(50, 120), "awake": rng.randint(10, 60)}
    sample = health.VitalsSample(timestamp=user.timestamp,
                                 heart_rate=heart_rate, oxygen=oxygen,
                                 sleep=sleep)
    steps = flows.soft_sos_sequence(user.user_id, health.soft_sos_alert(sample))
    return _assemble(user, health.soft_sos_query(sample), steps, [True])


def _hard_sos_start_episode(rng: Random) -> Trajectory:
    user = UserDetails(user_id=_fresh_user_id(rng), name=_fresh_name(rng),
                       timestamp=_system_moment(rng))
    location = {"latitude": round(rng.uniform(-60, 60), 4),
                "longitude": round(rng.uniform(-180, 180), 4)}
    ambulance = _fresh_ambulance(rng)
    steps = flows.hard_sos_start_sequence(user.user_id, user.name, location,
                                          ambulance)
    observations = [True, location, ambulance, True, True, True]
    return _assemble(user, "Hard SOS triggered", steps, observations)


def _hard_sos_end_episode(rng: Random) -> Trajectory:
    user = UserDetails(user_id=_fresh_user_id(rng), name=_fresh_name(rng),
                       timestamp=_system_moment(rng))
    ambulance = _fresh_ambulance(rng)
    steps = flows.hard_sos_end_sequence(user.user_id, user.name, ambulance)
    observations = [True, ambulance, True, True, True]
    return _assemble(user, "End SOS triggered", steps, observations)


@dataclass(frozen=True)
class UseCaseTemplate:
    """One family's recipe: an offline skeleton plus a backend prompt."""

    family: str
    skeleton: Callable[[Random], Trajectory]
    prompt: str


def _backend_prompt(family: str) -> str:
    return (f"Write one complete {family} interaction trajectory as JSON "
            "with the usual keys, matching the house format exactly. "
            "Reply with the JSON document only.")


TEMPLATES: dict[str, UseCaseTemplate] = {
    "general": UseCaseTemplate(
        "general", lambda rng: _booking_episode("general", rng),
        _backend_prompt("general")),
    "counter": UseCaseTemplate(
        "counter", lambda rng: _booking_episode("counter", rng),
        _backend_prompt("counter")),
    "negative": UseCaseTemplate(
        "negative", lambda rng: _booking_episode("negative", rng),
        _backend_prompt("negative")),
    "dietician": UseCaseTemplate(
        "dietician", lambda rng: _booking_episode("dietician", rng),
        _backend_prompt("dietician")),
    "soft_sos": UseCaseTemplate(
        "soft_sos", lambda rng: _soft_sos_episode(rng),
        _backend_prompt("soft_sos")),
    "hard_sos_start": UseCaseTemplate(
        "hard_sos_start", lambda rng: _hard_sos_start_episode(rng),
        _backend_prompt("hard_sos_start")),
    "hard_sos_end": UseCaseTemplate(
        "hard_sos_end", lambda rng: _hard_sos_end_episode(rng),
        _backend_prompt("hard_sos_end")),
}


def generate_trajectory(family: str, seed: int = 0, index: int = 0,
                        backend=None) -> Trajectory:
    """One complete trajectory of the family, deterministic in (seed, index).

    With a backend, the template's prompt is sent out and the reply must be
    a valid trajectory document; one retry before BackendFailure.
    """
    if family not in TEMPLATES:
        raise ValueError(f"unknown family {family!r}; "
                         f"expected one of {FAMILIES}")
    template = TEMPLATES[family]
    if backend is not None:
        last = None
        for _attempt in range(2):
            raw = backend.complete(template.prompt, "generator")
            try:
                trajectory = Trajectory.from_document(json.loads(raw))
                trajectory.validate()
                return trajectory
            except (ValueError, TrajectoryError) as exc:
                last = exc
        raise BackendFailure(f"backend output invalid after retry: {last}")
    return template.skeleton(_rng("gen", family, seed, index))


def generate(family: str, count: int, seed: int = 0) -> list[Trajectory]:
    return [generate_trajectory(family, seed, i) for i in range(count)]


# -- enhancement ---------------------------------------------------------------

@dataclass(frozen=True)
class EnhancementConfig:
    seed: int = 0
    names: tuple[str, ...] = FIRST_NAMES
    window_days: int = 90
    diseases: tuple[str, ...] = DISEASES

    def __post_init__(self):
        if self.window_days <= 0:
            raise ValueError("window_days must be positive")
        if not self.diseases:
            raise ValueError("disease list must not be empty")


ID_RE = re.compile(r"(?<![A-Za-z0-9])[A-Z]{4}\d{6}(?!\d)")
PHONE_RE = re.compile(r"(?<![\d])\+\d{9,13}(?!\d)")
ISO_DATE_RE = re.compile(r"(?<!\d)\d{4}-\d{2}-\d{2}(?!\d)")
DMY_DATE_RE = re.compile(r"(?<!\d)\d{2}/\d{2}/\d{4}(?!\d)")
TIME_RANGE_RE = re.compile(r"(?<![\d:-])\d{2}:\d{2}-\d{2}:\d{2}(?![\d-])")
# excludes range ends (after "-") but matches the HH:MM inside timestamps
BARE_TIME_RE = re.compile(r"(?<![\d:-])\d{2}:\d{2}(?![\d-])")

MERIDIEM_RE = re.compile(r"(?<![\d:])\d{1,2}:\d{2} [AP]M\b")
PROSE_DATE_RE = re.compile(
    r"(?:" + "|".join(flows.MONTHS) + r") \d{1,2}(?:st|nd|rd|th)\b")

ENTITY_CLASSES = (
    ("phone", PHONE_RE), ("uid", ID_RE), ("iso", ISO_DATE_RE),
    ("dmy", DMY_DATE_RE), ("meridiem", MERIDIEM_RE),
    ("prosedate", PROSE_DATE_RE), ("range", TIME_RANGE_RE),
    ("clock", BARE_TIME_RE))


def _scan_entities(text: str) -> tuple[dict[str, set[str]], list[tuple]]:
    """Per-class surfaces plus every match span, for the stitch pass."""
    found: dict[str, set[str]] = {name: set() for name, _rx in ENTITY_CLASSES}
    spans: list[tuple] = []
    for name, rx in ENTITY_CLASSES:
        bucket = found[name]
        for match in rx.finditer(text):
            bucket.add(match.group(0))
            spans.append((match.start(), match.start() - match.end(),
                          match.end(), match.group(0)))
    return found, spans


def _stitch(text: str, spans: list[tuple], mapping: dict[str, str]) -> str:
    """Rebuild ``text`` with each span swapped for its mapped value.

    Sorting puts the longest span first at a shared start, so a time range
    or a meridiem form wins over the bare time inside it; spans swallowed
    by an earlier replacement are dropped.
    """
    parts = []
    prev = 0
    for start, _neg_len, end, surface in sorted(spans):
        if start < prev:
            continue
        replacement = mapping.get(surface)
        if replacement is None:
            continue
        parts.append(text[prev:start])
        parts.append(replacement)
        prev = end
    parts.append(text[prev:])
    return "".join(parts)


def _parse_any_date(surface: str) -> date | None:
    try:
        if "/" in surface:
            d, m, y = surface.split("/")
            return date(int(y), int(m), int(d))
        return date.fromisoformat(surface)
    except ValueError:
        return None


def _render_like(surface: str, day: date) -> str:
    if "/" in surface:
        return f"{day.day:02d}/{day.month:02d}/{day.year}"
    return day.isoformat()


def _shift_time(surface: str, start_map: dict[str, str]) -> str:
    start, end = surface.split("-")
    new_start = start_map[start]
    duration = (datetime.combine(date.min, _hhmm(end))
                - datetime.combine(date.min, _hhmm(start)))
    new_end = (datetime.combine(date.min, _hhmm(new_start)) + duration).time()
    return f"{new_start}-{new_end:%H:%M}"


def _hhmm(text: str) -> time:
    hour, minute = map(int, text.split(":"))
    return time(hour % 24, minute)


def _fresh_day_picks(rng: Random, count: int, lo: int, hi: int) -> list[int]:
    """``count`` distinct day offsets in [lo, hi], ascending."""
    pool = range(lo, hi + 1)
    if count > len(pool):
        raise ValueError(f"cannot place {count} dates in a "
                         f"{len(pool)}-day span")
    return sorted(rng.sample(pool, count))


def enhance(trajectory: Trajectory, cfg: EnhancementConfig | None = None,
            index: int = 0) -> Trajectory:
    """A copy with fresh surface entities, consistent across the episode.

    Dates keep their story: past dates stay before the (new) system date
    and future dates stay within the booking window after it. Time ranges
    keep their duration. The same original value maps to the same
    replacement at every occurrence.
    """
    cfg = cfg or EnhancementConfig()
    rng = _rng("enh", cfg.seed, index)
    text = json.dumps(trajectory.to_document(), ensure_ascii=False)
    details = trajectory.user_details

    found, spans = _scan_entities(text)

    mapping: dict[str, str] = {}

    if not found["uid"]:
        raise PatternMiss("no ids found")
    for old in sorted(found["uid"]):
        new = _fresh_user_id(rng)
        while new == old or new in mapping.values():
            new = _fresh_user_id(rng)
        mapping[old] = new

    for old in sorted(found["phone"]):
        new = _fresh_phone(rng)
        while new == old or new in mapping.values():
            new = _fresh_phone(rng)
        mapping[old] = new

    # calendar-keyed date replacement so every rendering of one day moves
    # together and the before/after ordering survives
    calendar: dict[date, set[str]] = {}
    for surface in found["iso"] | found["dmy"]:
        day = _parse_any_date(surface)
        if day is not None:
            calendar.setdefault(day, set()).add(surface)
    system_day = details.timestamp.date()
    if system_day not in calendar:
        raise PatternMiss("system date absent from the episode")
    past = sorted(d for d in calendar if d < system_day)
    future = sorted(d for d in calendar if d > system_day)
    new_system = date(2023, 1, 1) + timedelta(days=rng.randrange(880))
    day_map = {system_day: new_system}
    # earliest past date takes the largest offset back from the system day
    for old, offset in zip(past, reversed(_fresh_day_picks(
            rng, len(past), 1, 400))):
        day_map[old] = new_system - timedelta(days=offset)
    for old, offset in zip(future, _fresh_day_picks(
            rng, len(future), 1, cfg.window_days)):
        day_map[old] = new_system + timedelta(days=offset)
    for old_day, old_surfaces in calendar.items():
        for surface in old_surfaces:
            mapping[surface] = _render_like(surface, day_map[old_day])
        prose = flows.human_date(old_day.isoformat())
        if prose in found["prosedate"]:
            mapping[prose] = flows.human_date(day_map[old_day].isoformat())

    # times: fresh starts, ranges keep their duration, prose follows
    meridiem_starts = {s: f"{datetime.strptime(s, '%I:%M %p'):%H:%M}"
                       for s in found["meridiem"]}
    starts = sorted({r.split("-")[0] for r in found["range"]}
                    | found["clock"] | set(meridiem_starts.values()))
    if not starts:
        raise PatternMiss("no times found")
    start_map: dict[str, str] = {}
    for old in starts:
        new = f"{rng.randint(7, 20):02d}:{rng.randrange(0, 60, 5):02d}"
        while new == old or new in start_map.values():
            new = f"{rng.randint(7, 20):02d}:{rng.randrange(0, 60, 5):02d}"
        start_map[old] = new
        mapping[old] = new
    for old in sorted(found["range"]):
        mapping[old] = _shift_time(old, start_map)
    for surface, canonical in meridiem_starts.items():
        mapping[surface] = flows.human_time(start_map[canonical])

    if not details.name:
        raise PatternMiss("user profile has no name")
    new_name = _fresh_name(rng)
    while new_name == details.name:
        new_name = _fresh_name(rng)

    replaced = _stitch(text, spans, mapping)
    replaced = re.sub(rf"\b{re.escape(details.name)}\b",
                      lambda _m: new_name, replaced)

    enhanced = Trajectory.from_document(json.loads(replaced))
    enhanced.validate()
    return enhanced


def enhance_corpus(trajectories: Iterable[Trajectory],
                   cfg: EnhancementConfig | None = None) -> list[Trajectory]:
    cfg = cfg or EnhancementConfig()
    return [enhance(t, cfg, index=i) for i, t in enumerate(trajectories)]


# -- verification --------------------------------------------------------------

@dataclass
class VerificationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def describe(self) -> str:
        if self.ok:
            return "clean"
        return "; ".join(self.violations)


def _flag(report: VerificationReport, message: str) -> None:
    report.violations.append(message)


def _pairs(trajectory: Trajectory) -> list[tuple[object, object]]:
    """Caller payloads with the observation that answered each."""
    out = []
    states = trajectory.states
    for i, state in enumerate(states):
        if state.kind == "caller" and i + 1 < len(states) and \
                states[i + 1].kind == "observation":
            out.append((state.payload, states[i + 1].payload))
    return out


def verify(trajectory: Trajectory, registry: ToolRegistry | None = None,
           family: str | None = None,
           window_days: int = 90) -> VerificationReport:
    """Structural, schema, temporal, consistency, and family checks."""
    registry = registry or load_default_registry()
    report = VerificationReport()

    if not trajectory.states:
        _flag(report, "structure: empty trajectory")
        return report
    try:
        trajectory.validate()
    except TrajectoryError as exc:
        _flag(report, f"structure: {exc}")
        return report

    details = trajectory.user_details
    system_day = details.timestamp.date()
    pairs = _pairs(trajectory)

    for call, _obs in pairs:
        call_report = validate_call(call, registry)
        if not call_report.ok:
            _flag(report, f"schema: {call.tool}: {call_report.describe()}")
        if "user_id" in call.parameters and \
                call.parameters["user_id"] != details.user_id:
            _flag(report, f"consistency: {call.tool} user_id "
                          f"{call.parameters['user_id']!r} is not the session user")

    specialist = None
    offer_reply = None
    for call, obs in pairs:
        tool, params = call.tool, call.parameters
        if tool == "retrieve_past_complaints":
            for record in obs if isinstance(obs, list) else []:
                when = _parse_any_date(record.get("date", ""))
                if when is None or when >= system_day:
                    _flag(report, f"temporal: past complaint {record.get('date')!r} "
                                  f"not before system date {system_day}")
        elif tool == "get_available_specialists" and isinstance(obs, dict) and obs:
            specialist = obs
            slot_day = _parse_any_date(obs.get("available_slot", {}).get("date", ""))
            if slot_day is None or not (
                    system_day < slot_day <= system_day + timedelta(days=window_days)):
                _flag(report, f"temporal: slot date "
                              f"{obs.get('available_slot', {}).get('date')!r} outside "
                              f"({system_day}, {system_day + timedelta(days=window_days)}]")
        elif tool == "get_input_from_user" and str(
                params.get("questions", "")).endswith("schedule an appointment?"):
            offer_reply = obs
        elif tool in ("confirm_appointment", "save_appointment_history"):
            if specialist is None:
                _flag(report, f"consistency: {tool} before any specialist search")
            else:
                if params.get("specialist_id") != specialist["specialist_id"]:
                    _flag(report, f"consistency: {tool} books "
                                  f"{params.get('specialist_id')!r}, search "
                                  f"returned {specialist['specialist_id']!r}")
                stamp = flows.appointment_stamp(specialist["available_slot"])
                if params.get("appointment_time_date") != stamp:
                    _flag(report, f"consistency: {tool} stamp "
                                  f"{params.get('appointment_time_date')!r} != "
                                  f"offered slot {stamp!r}")
        elif tool == "store_symptoms":
            if params.get("timestamp") != details.timestamp.isoformat():
                _flag(report, "consistency: store_symptoms timestamp differs "
                              "from the session timestamp")

    symptom_params = [call.parameters["symptoms"] for call, _o in pairs
                      if call.tool in ("retrieve_past_complaints",
                                       "get_available_specialists",
                                       "save_appointment_history",
                                       "store_symptoms")
                      and "symptoms" in call.parameters]
    if len(set(symptom_params)) > 1:
        _flag(report, f"consistency: symptom strings differ across calls: "
                      f"{sorted(set(symptom_params))}")

    if family is not None:
        _verify_family(trajectory, family, pairs, offer_reply, report)
    return report


def _verify_family(trajectory, family, pairs, offer_reply, report) -> None:
    tools = tuple(call.tool for call, _o in pairs)
    if family in SOS_TOOL_SEQUENCES:
        want = SOS_TOOL_SEQUENCES[family]
        if tools != want:
            _flag(report, f"family: {family} tool sequence {tools} != {want}")
        return
    if family not in BOOKING_FAMILIES:
        _flag(report, f"family: unknown family {family!r}")
        return
    if family == "negative":
        if "confirm_appointment" in tools:
            _flag(report, "family: negative episode confirms an appointment")
        if offer_reply is None or flows.is_acceptance(offer_reply):
            _flag(report, "family: negative episode lacks a decline reply")
    else:
        if "confirm_appointment" not in tools:
            _flag(report, f"family: {family} episode never confirms")
    if family == "counter":
        first_ask = tools.index("get_input_from_user") if \
            "get_input_from_user" in tools else len(tools)
        first_search = tools.index("get_available_specialists") if \
            "get_available_specialists" in tools else -1
        if first_search < first_ask:
            _flag(report, "family: counter episode has no clarification "
                          "before the specialist search")
    if family == "dietician":
        for call, _o in pairs:
            if call.tool == "get_available_specialists" and \
                    call.parameters.get("specialization") != "dietician":
                _flag(report, "family: dietician episode routed to "
                              f"{call.parameters.get('specialization')!r}")


# -- interleaving --------------------------------------------------------------

def _sample_input(role: str, details_line: str, tool_lines: list[str],
                  history_lines: list[str], rng: Random) -> str:
    shuffled = list(tool_lines)
    rng.shuffle(shuffled)
    return "\n\n".join([
        f"[role]\n{role} agent, health assistant ({PROMPT_VERSION})",
        "[user_details]\n" + details_line,
        "[tools]\n" + "\n".join(shuffled),
        "[history]\n" + "\n".join(history_lines),
        "[instruction]\n" + INSTRUCTIONS[role],
    ])


# shared fallback stream so the shuffle stays fresh call over call
_INTERLEAVE_RNG = Random(0)


def interleave(trajectory: Trajectory, registry: ToolRegistry | None = None,
               rng: Random | None = None,
               tool_lines: list[str] | None = None) -> tuple[list[dict], list[dict]]:
    """Per-state training samples: one per planner state, one per caller.

    Each sample's input renders the tools (freshly shuffled per sample),
    the user details, and every state before the target; the output is
    the tagged text the agent should produce.
    """
    if tool_lines is None:
        tool_lines = render_tool_lines(registry or load_default_registry())
    rng = rng or _INTERLEAVE_RNG
    details_line = json.dumps(trajectory.user_details.to_dict(),
                              ensure_ascii=False)
    history: list[str] = []
    planner_samples: list[dict] = []
    caller_samples: list[dict] = []
    for state in trajectory.states:
        if state.kind == "planner":
            planner_samples.append({
                "role": "planner",
                "input": _sample_input("planner", details_line, tool_lines,
                                       history, rng),
                "output": render_planner_output(state.payload),
            })
        elif state.kind == "caller":
            caller_samples.append({
                "role": "caller",
                "input": _sample_input("caller", details_line, tool_lines,
                                       history, rng),
                "output": render_caller_output(state.payload),
            })
        history.append(json.dumps(state_to_entry(state), ensure_ascii=False))
    return planner_samples, caller_samples


def dataset_stats(samples: Iterable[dict]) -> dict:
    """Sample counts per family and role, plus totals."""
    families: dict[str, dict[str, int]] = {}
    total = {"planner": 0, "caller": 0}
    for sample in samples:
        family = sample.get("family", "unknown")
        role = sample["role"]
        bucket = families.setdefault(family, {"planner": 0, "caller": 0})
        bucket[role] += 1
        total[role] += 1
    return {"families": families, "total": total,
            "samples": total["planner"] + total["caller"]}
