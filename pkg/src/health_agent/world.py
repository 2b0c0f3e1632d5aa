"""Simulated environment the tools act on.

One world instance backs a session: registered users, specialists with open
slots, an ambulance fleet, an SMS log, and scripted user replies. Episode
records (symptoms, appointment history, notifications) live in the world by
default and in an attached persistent store when one is given, so the same
execute() path serves replays, live sessions, and tests.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from .memory import LongTermStore, match_complaints
from .tools import ToolRegistry, load_default_registry, normalize_call, validate_call
from .trajectory import ToolCall


class UnknownTool(Exception):
    """The call names a tool outside the registry."""


class InvalidCall(Exception):
    """The call is schema-valid but the world rejects it."""


class SuspendedAwaitingUser(Exception):
    """get_input_from_user ran with no scripted reply; the session parks."""

    def __init__(self, question: str):
        super().__init__(question)
        self.question = question


_TIME_DATE_RE = re.compile(
    r"^\s*(?P<time>\d{1,2}:\d{2}(?:-\d{1,2}:\d{2})?)\s*,\s*"
    r"(?P<day>\d{2})/(?P<month>\d{2})/(?P<year>\d{2}(?:\d{2})?)\s*$")
_ISO_FIRST_RE = re.compile(
    r"^\s*(?P<date>\d{4}-\d{2}-\d{2})[ T]?(?P<time>\d{1,2}:\d{2}(?:-\d{1,2}:\d{2})?)?\s*$")


def _pad(clock: str) -> str:
    if not clock:
        return ""
    parts = []
    for piece in clock.split("-"):
        hh, mm = piece.split(":")
        if int(hh) > 23 or int(mm) > 59:
            raise ValueError(f"impossible clock time: {piece}")
        parts.append(f"{int(hh):02d}:{mm}")
    return "-".join(parts)


def parse_appointment_time_date(value: str) -> tuple[str, str]:
    """Normalize an appointment stamp to (YYYY-MM-DD, HH:MM[-HH:MM]).

    Accepts the recorded "HH:MM-HH:MM, DD/MM/YYYY" form, two-digit years,
    a bare start time, and ISO-date-first variants.
    """
    m = _TIME_DATE_RE.match(value)
    if m:
        year = m.group("year")
        if len(year) == 2:
            year = "20" + year
        date = f"{year}-{m.group('month')}-{m.group('day')}"
        datetime.strptime(date, "%Y-%m-%d")
        return date, _pad(m.group("time"))
    m = _ISO_FIRST_RE.match(value)
    if m:
        datetime.strptime(m.group("date"), "%Y-%m-%d")
        return m.group("date"), _pad(m.group("time") or "")
    raise ValueError(f"unrecognized appointment time: {value!r}")


def _slot_taken(slot_time: str, wanted: str) -> bool:
    """True when a booked time stamp refers to this slot."""
    if not wanted:
        return False
    return slot_time == wanted or slot_time.startswith(wanted + "-")


@dataclass
class WorldState:
    """Mutable environment shared by every tool in a session."""

    users: dict[str, dict] = field(default_factory=dict)
    specialists: list[dict] = field(default_factory=list)
    ambulances: list[dict] = field(default_factory=list)
    assignments: dict[str, str] = field(default_factory=dict)
    appointments: list[dict] = field(default_factory=list)
    message_log: list[dict] = field(default_factory=list)
    user_responses: deque = field(default_factory=deque)
    pending_question: str | None = None
    clock: datetime = field(default_factory=datetime.now)
    store: LongTermStore | None = None
    # outbound delivery adapter; None keeps sends in the message log only
    sms: object | None = None
    # in-world fallbacks when no store is attached
    symptom_records: dict[str, list[dict]] = field(default_factory=dict)
    appointment_history: dict[str, list[dict]] = field(default_factory=dict)
    notifications: dict[str, list[dict]] = field(default_factory=dict)

    def add_user(self, user: dict) -> None:
        self.users[user["user_id"]] = user
        if self.store is not None:
            self.store.ensure_user(user["user_id"], user.get("name", ""),
                                   user.get("phone_no"),
                                   user.get("emergency_contacts"))

    def add_specialist(self, specialist: dict) -> None:
        self.specialists.append(specialist)

    def add_ambulance(self, ambulance: dict) -> None:
        self.ambulances.append(ambulance)

    def user(self, user_id: str) -> dict:
        if user_id not in self.users:
            raise InvalidCall(f"unknown user {user_id}")
        return self.users[user_id]

    def ambulance(self, ambulance_id: str) -> dict | None:
        for amb in self.ambulances:
            if amb["ambulance_id"] == ambulance_id:
                return amb
        return None

    # -- record collections (store-backed when attached) -----------------

    def past_complaints(self, user_id: str) -> list[dict]:
        if self.store is not None:
            return self.store.symptom_records(user_id)
        return list(self.symptom_records.get(user_id, []))

    def record_symptoms(self, user_id: str, symptoms: str, timestamp: str) -> None:
        if self.store is not None:
            self.store.add_symptom_record(user_id, symptoms, timestamp)
            return
        self.symptom_records.setdefault(user_id, []).append(
            {"date": timestamp[:10], "symptoms": symptoms, "timestamp": timestamp})

    def record_appointment(self, user_id: str, specialist_id: str, symptoms: str,
                           appointment_time_date: str, date: str, time: str) -> None:
        if self.store is not None:
            self.store.add_appointment(user_id, specialist_id,
                                       appointment_time_date, symptoms, date, time)
            return
        self.appointment_history.setdefault(user_id, []).append({
            "user_id": user_id, "specialist_id": specialist_id,
            "symptoms": symptoms, "appointment_time_date": appointment_time_date,
            "appointment_date": date, "appointment_time": time})

    def past_appointments(self, user_id: str) -> list[dict]:
        if self.store is not None:
            rows = self.store.appointment_history(user_id)
        else:
            rows = self.appointment_history.get(user_id, [])
        return [{"specialist_id": r["specialist_id"], "symptoms": r["symptoms"],
                 "appointment_time_date": r["appointment_time_date"]} for r in rows]

    def record_notification(self, user_id: str, message: str) -> None:
        if self.store is not None:
            self.store.add_notification(user_id, message, self.clock.isoformat())
            return
        self.notifications.setdefault(user_id, []).append(
            {"message": message, "created_at": self.clock.isoformat()})


_DEFAULT_REGISTRY: ToolRegistry | None = None


def _registry() -> ToolRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = load_default_registry()
    return _DEFAULT_REGISTRY


def _specialist_matches(specialist: dict, specialization: str) -> bool:
    return specialist["specialization"].strip().lower() == specialization.strip().lower()


def _slot_booked(world: WorldState, specialist_id: str, slot: dict) -> bool:
    return any(a["specialist_id"] == specialist_id and a["date"] == slot["date"]
               and a["time"] == slot["time"] for a in world.appointments)


def _pick_specialist(world: WorldState, specialization: str) -> dict | None:
    """Earliest open future slot; ties go to start time then specialist id."""
    best = None
    for sp in world.specialists:
        if not _specialist_matches(sp, specialization):
            continue
        for slot in sp.get("available_slots", []):
            if slot["date"] <= world.clock.date().isoformat():
                continue
            if _slot_booked(world, sp["specialist_id"], slot):
                continue
            key = (slot["date"], slot["time"], sp["specialist_id"])
            if best is None or key < best[0]:
                best = (key, sp, slot)
    if best is None:
        return None
    _, sp, slot = best
    return {"specialist_id": sp["specialist_id"], "name": sp["name"],
            "available_slot": {"date": slot["date"], "time": slot["time"]}}


def _confirm_appointment(world: WorldState, params: dict):
    user_id = params["user_id"]
    world.user(user_id)
    specialist = None
    for sp in world.specialists:
        if sp["specialist_id"] == params["specialist_id"]:
            specialist = sp
    if specialist is None:
        raise InvalidCall(f"unknown specialist {params['specialist_id']}")
    try:
        date, time = parse_appointment_time_date(params["appointment_time_date"])
    except ValueError as exc:
        raise InvalidCall(str(exc)) from exc
    slot = None
    for candidate in specialist.get("available_slots", []):
        if candidate["date"] == date and _slot_taken(candidate["time"], time):
            slot = candidate
    if slot is None:
        raise InvalidCall(
            f"{params['specialist_id']} has no slot at {time} on {date}")
    for appt in world.appointments:
        if (appt["specialist_id"] == specialist["specialist_id"]
                and appt["date"] == slot["date"] and appt["time"] == slot["time"]):
            raise InvalidCall("slot is already booked")
        if (appt["user_id"] == user_id and appt["date"] == slot["date"]
                and appt["time"] == slot["time"]):
            raise InvalidCall("user already has an appointment at that time")
    world.appointments.append({
        "user_id": user_id, "specialist_id": specialist["specialist_id"],
        "date": slot["date"], "time": slot["time"],
        "appointment_time_date": params["appointment_time_date"]})
    return True


def _send_message(world: WorldState, params: dict, session_user: str):
    text = params["text"]
    recipients: list[tuple[str, bool]] = []
    if params.get("phone_no"):
        recipients.append((params["phone_no"], False))
    if params.get("to_emergency_contacts"):
        contacts = world.user(session_user).get("emergency_contacts", [])
        if not contacts:
            raise InvalidCall(f"user {session_user} has no emergency contacts")
        recipients.extend((c, True) for c in contacts)
    if not recipients:
        raise InvalidCall("send_message needs phone_no or to_emergency_contacts")
    for number, is_contact in recipients:
        world.message_log.append({
            "to": number, "text": text, "emergency_contact": is_contact,
            "at": world.clock.isoformat()})
        if world.sms is not None:
            world.sms.send(number, text)
    return True


def _search_ambulance(world: WorldState, params: dict, session_user: str):
    already = world.assignments.get(session_user)
    if already:
        amb = world.ambulance(already)
        return {"ambulance_id": amb["ambulance_id"], "phone_no": amb["phone_no"]}
    assigned = set(world.assignments.values())
    for amb in world.ambulances:
        if amb["ambulance_id"] not in assigned:
            world.assignments[session_user] = amb["ambulance_id"]
            amb["location"] = dict(params["location"])
            return {"ambulance_id": amb["ambulance_id"], "phone_no": amb["phone_no"]}
    raise InvalidCall("no ambulance available")


def _get_assigned_ambulance(world: WorldState, params: dict):
    ambulance_id = world.assignments.get(params["user_id"])
    if ambulance_id is None:
        raise InvalidCall(f"no active emergency for user {params['user_id']}")
    amb = world.ambulance(ambulance_id)
    return {"ambulance_id": amb["ambulance_id"], "phone_no": amb["phone_no"]}


def execute(call: ToolCall, world: WorldState, user_id: str,
            registry: ToolRegistry | None = None):
    """Run one validated tool call against the world, returning the result."""
    registry = registry or _registry()
    spec = registry.lookup(call.tool)
    if spec is None:
        raise UnknownTool(call.tool)
    report = validate_call(call, registry)
    if not report.ok:
        raise InvalidCall(report.describe())
    params = normalize_call(call, registry).parameters

    if call.tool == "get_location":
        location = world.user(user_id).get("location")
        if not location:
            raise InvalidCall(f"no known location for user {user_id}")
        return dict(location)

    if call.tool == "search_ambulance":
        return _search_ambulance(world, params, user_id)

    if call.tool == "send_message":
        return _send_message(world, params, user_id)

    if call.tool == "get_available_specialists":
        return _pick_specialist(world, params["specialization"]) or {}

    if call.tool == "confirm_appointment":
        return _confirm_appointment(world, params)

    if call.tool == "save_appointment_history":
        world.user(params["user_id"])
        try:
            date, time = parse_appointment_time_date(params["appointment_time_date"])
        except ValueError as exc:
            raise InvalidCall(str(exc)) from exc
        world.record_appointment(params["user_id"], params["specialist_id"],
                                 params["symptoms"],
                                 params["appointment_time_date"], date, time)
        return True

    if call.tool == "get_appointment_history":
        world.user(params["user_id"])
        return world.past_appointments(params["user_id"])

    if call.tool == "retrieve_past_complaints":
        world.user(params["user_id"])
        records = world.past_complaints(params["user_id"])
        matched = match_complaints(records, params["symptoms"],
                                   params.get("date_range"))
        return [{"date": r["date"], "symptoms": r["symptoms"]} for r in matched]

    if call.tool == "follow_up_with_user":
        world.user(params["user_id"])
        world.record_notification(
            params["user_id"], f"Follow-up on: {params['current_symptoms']}")
        return True

    if call.tool == "notify_user":
        world.user(params["user_id"])
        world.record_notification(params["user_id"], params["message"])
        return True

    if call.tool == "get_input_from_user":
        if world.user_responses:
            world.pending_question = None
            return world.user_responses.popleft()
        world.pending_question = params["questions"]
        raise SuspendedAwaitingUser(params["questions"])

    if call.tool == "store_symptoms":
        world.user(params["user_id"])
        world.record_symptoms(params["user_id"], params["symptoms"],
                              params["timestamp"])
        return True

    if call.tool == "get_assigned_ambulance":
        return _get_assigned_ambulance(world, params)

    raise UnknownTool(call.tool)


DEFAULT_EMERGENCY_CONTACT = "+10000000000"
DEFAULT_LOCATION = {"latitude": 23.5326, "longitude": 139.7524}


def derive_world_from_trajectory(trajectory) -> WorldState:
    """Seed a world so the trajectory's calls reproduce its observations.

    Every fact the episode assumes (location, fleet, specialists, past
    complaints, user replies) is read back from its own observation states.
    """
    details = trajectory.user_details
    world = WorldState(clock=details.timestamp)
    user = {"user_id": details.user_id, "name": details.name,
            "emergency_contacts": [DEFAULT_EMERGENCY_CONTACT]}
    world.add_user(user)
    states = trajectory.states
    for i, state in enumerate(states):
        if state.kind != "caller":
            continue
        if i + 1 >= len(states) or states[i + 1].kind != "observation":
            continue
        call, result = state.payload, states[i + 1].payload
        if call.tool == "get_location" and isinstance(result, dict):
            user["location"] = dict(result)
        elif call.tool == "search_ambulance" and isinstance(result, dict) and result:
            if world.ambulance(result["ambulance_id"]) is None:
                world.add_ambulance({"ambulance_id": result["ambulance_id"],
                                     "phone_no": result["phone_no"]})
        elif call.tool == "get_assigned_ambulance" and isinstance(result, dict) and result:
            if world.ambulance(result["ambulance_id"]) is None:
                world.add_ambulance({"ambulance_id": result["ambulance_id"],
                                     "phone_no": result["phone_no"]})
            world.assignments[call.parameters["user_id"]] = result["ambulance_id"]
        elif call.tool == "get_available_specialists" and isinstance(result, dict) and result:
            if not any(sp["specialist_id"] == result["specialist_id"]
                       for sp in world.specialists):
                world.add_specialist({
                    "specialist_id": result["specialist_id"],
                    "name": result["name"],
                    "specialization": call.parameters["specialization"],
                    "available_slots": [dict(result["available_slot"])]})
        elif call.tool == "retrieve_past_complaints" and isinstance(result, list):
            records = world.symptom_records.setdefault(
                call.parameters["user_id"], [])
            for rec in result:
                records.append({"date": rec["date"], "symptoms": rec["symptoms"],
                                "timestamp": rec["date"] + "T00:00:00"})
        elif call.tool == "get_input_from_user":
            world.user_responses.append(result)
    return world


def default_world(clock: datetime | None = None,
                  store: LongTermStore | None = None) -> WorldState:
    """A small deterministic fixture: specialists, two ambulances, no users.

    Slot dates keep their distance from the clock, so the fixture books the
    same way on any start date.
    """
    now = clock or datetime(2025, 3, 1, 9, 0)
    world = WorldState(clock=now, store=store)

    def slot(days_ahead: int, time: str) -> dict:
        return {"date": (now.date() + timedelta(days=days_ahead)).isoformat(),
                "time": time}

    world.specialists = [
        {"specialist_id": "AECJ317777", "name": "Dr. Diego Arroyo (General Physician)",
         "specialization": "general physician",
         "available_slots": [slot(19, "11:00-11:30"), slot(32, "09:00-09:30")]},
        {"specialist_id": "CXAE230642", "name": "Dr. Diego Perez (General Practitioner)",
         "specialization": "general practitioner",
         "available_slots": [slot(21, "10:00-10:30")]},
        {"specialist_id": "GQLD492817", "name": "Dr. Gabriel Lopez (Neurologist)",
         "specialization": "neurologist",
         "available_slots": [slot(24, "10:00-10:30"), slot(40, "15:00-15:30")]},
        {"specialist_id": "KHPW651294", "name": "Dr. Maria Santos (Dietician)",
         "specialization": "dietician",
         "available_slots": [slot(17, "09:30-10:00")]},
        {"specialist_id": "RWQN120843", "name": "Dr. Aisha Khan (Cardiologist)",
         "specialization": "cardiologist",
         "available_slots": [slot(20, "14:00-14:30")]},
        {"specialist_id": "ZPLV562301", "name": "Dr. Elena Petrova (Pulmonologist)",
         "specialization": "pulmonologist",
         "available_slots": [slot(23, "08:30-09:00")]},
    ]
    world.ambulances = [
        {"ambulance_id": "AMBpF0E", "phone_no": "+146910850030"},
        {"ambulance_id": "AMBUaTg", "phone_no": "+235135781046"},
    ]
    return world
