"""HTTP gateway: chat, vitals, SOS, prescriptions, reminders, and reports.

One process owns a simulated world, a persistent store, and a policy
backend. A chat session suspends whenever the planner asks the user a
question and resumes when the next message for it arrives; because every
session is persisted as its trajectory document, a suspended session can
be resumed by a freshly started process. The chat transport is plain
request/response; clients poll the session log for agent events.
"""

from __future__ import annotations

import os
import socket
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Callable, Protocol

import requests
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import flows
from .health import (
    EmptyPrescription,
    ReportInputs,
    VitalsMonitor,
    VitalsSample,
    check_vitals,
    directives_to_reminders,
    due_reminders,
    generate_report,
    parse_prescription,
    render_report_text,
)
from .memory import LongTermStore, UnknownUser
from .policies import HttpPolicy, PolicyBackend, RulePolicy
from .session import AWAITING_USER, COMPLETE, resume_session, run_session
from .tools import load_default_registry, normalize_call
from .trajectory import (
    SchemaViolation,
    Trajectory,
    UserDetails,
    state_to_entry,
)
from .world import (
    DEFAULT_EMERGENCY_CONTACT,
    DEFAULT_LOCATION,
    default_world,
)

RUNNING = "running"
AWAITING = "awaiting_user"
COMPLETED = "completed"
FAILED = "failed"

SOS_KINDS = ("hard_start", "hard_end")

# registered on an empty store so the console works out of the box
DEMO_USER = {
    "user_id": "DEMO000001",
    "name": "Alex Morgan",
    "phone_no": "+14155550123",
    "emergency_contacts": ["+14155550111"],
}


class GatewayError(Exception):
    """Request-level failure with a stable error label and HTTP status."""

    http_status = 400
    label = "GatewayError"

    def payload(self) -> dict:
        return {"error": self.label, "detail": str(self)}


class ConfigError(GatewayError):
    label = "ConfigError"


class UnknownSession(GatewayError):
    http_status = 404
    label = "UnknownSession"


class SessionFinished(GatewayError):
    http_status = 409
    label = "SessionFinished"


class NoActiveSos(GatewayError):
    http_status = 409
    label = "NoActiveSos"


class InvalidRequest(GatewayError):
    http_status = 422
    label = "InvalidRequest"


class SessionFailed(GatewayError):
    http_status = 500
    label = "SessionFailed"

    def __init__(self, detail: str, session: dict):
        super().__init__(detail)
        self.session = session

    def payload(self) -> dict:
        return {"error": self.label, "detail": str(self),
                "session": self.session}


# -- SMS gateway adapters -----------------------------------------------------

class SmsGateway(Protocol):
    def send(self, phone_no: str, text: str) -> dict: ...


class MockSmsGateway:
    """Delivery stays in the world's message log; nothing leaves the process."""

    def __init__(self):
        self.acks: list[dict] = []

    def send(self, phone_no: str, text: str) -> dict:
        ack = {"delivered": True, "to": phone_no}
        self.acks.append(ack)
        return ack


class ExternalSmsGateway:
    """Hands each message to an HTTP SMS provider."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        if not endpoint:
            raise ConfigError("external SMS mode needs a provider endpoint")
        self.endpoint = endpoint
        self.timeout = timeout

    def send(self, phone_no: str, text: str) -> dict:
        resp = requests.post(self.endpoint,
                             json={"phone_no": phone_no, "text": text},
                             timeout=self.timeout)
        resp.raise_for_status()
        return {"delivered": True, "to": phone_no}


def make_sms_gateway(mode: str, endpoint: str = "") -> SmsGateway:
    if mode == "mock":
        return MockSmsGateway()
    if mode == "external":
        return ExternalSmsGateway(endpoint)
    raise ConfigError(f"unknown SMS mode {mode!r}")


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8000
    store_path: str = ":memory:"
    model_endpoint: str = ""
    sms_mode: str = "mock"
    sms_endpoint: str = ""
    seed_demo: bool = True
    tick_seconds: float = 30.0

    def __post_init__(self):
        if self.sms_mode not in ("mock", "external"):
            raise ConfigError(f"unknown SMS mode {self.sms_mode!r}")
        if self.tick_seconds <= 0:
            raise ConfigError("tick_seconds must be positive")

    @classmethod
    def from_env(cls, env=os.environ) -> "ServiceConfig":
        return cls(
            port=int(env.get("HA_PORT", "8000")),
            store_path=env.get("HA_STORE_PATH", ":memory:"),
            model_endpoint=env.get("HA_MODEL_ENDPOINT", ""),
            sms_mode=env.get("HA_SMS_MODE", "mock"),
            sms_endpoint=env.get("HA_SMS_ENDPOINT", ""),
            seed_demo=env.get("HA_SEED_DEMO", "1") not in ("0", "false", ""),
            tick_seconds=float(env.get("HA_TICK_SECONDS", "30")),
        )


# -- session bookkeeping ------------------------------------------------------

_OUTCOME_STATUS = {COMPLETE: COMPLETED, AWAITING_USER: AWAITING}


@dataclass
class SessionHandle:
    session_id: str
    user_id: str
    kind: str
    status: str
    trajectory: Trajectory
    pending_question: str | None = None
    failure: str | None = None

    def events(self) -> list[dict]:
        return [state_to_entry(s) for s in self.trajectory.states]

    def snapshot(self, since: int = 0) -> dict:
        return {
            "session_id": self.session_id,
            "user_id": self.user_id,
            "kind": self.kind,
            "status": self.status,
            "pending_question": self.pending_question,
            "failure": self.failure,
            "events": self.events()[since:],
        }


def _last_notification(trajectory: Trajectory, registry) -> str | None:
    for state in reversed(trajectory.states):
        if state.kind == "caller" and state.payload.tool == "notify_user":
            # normalization folds the goldens' alias spellings into "message"
            call = normalize_call(state.payload, registry)
            return call.parameters.get("message")
    return None


def _metric_summary(values: list[float]) -> dict:
    if not values:
        return {"min": 0, "max": 0, "mean": 0, "count": 0}
    return {"min": min(values), "max": max(values),
            "mean": sum(values) / len(values), "count": len(values)}


class HealthGateway:
    """The service runtime behind the HTTP surface.

    All session-driving operations serialize on one lock; the store has
    its own. Reads of a session log run lock-free because a trajectory
    only ever grows.
    """

    def __init__(self, config: ServiceConfig | None = None,
                 clock: Callable[[], datetime] = datetime.now,
                 policy: PolicyBackend | None = None,
                 sms: SmsGateway | None = None):
        self.config = config or ServiceConfig()
        self.clock = clock
        self.store = LongTermStore(self.config.store_path)
        self.sms = sms if sms is not None else make_sms_gateway(
            self.config.sms_mode, self.config.sms_endpoint)
        self.world = default_world(clock=clock(), store=self.store)
        self.world.sms = self.sms
        self.policy = policy or self._default_policy()
        self.registry = load_default_registry()
        self.monitor = VitalsMonitor()
        self.sessions: dict[str, SessionHandle] = {}
        self._lock = threading.RLock()
        self._load_users()
        self._load_sessions()
        if self.config.seed_demo and not self.world.users:
            self.register_user(dict(DEMO_USER))

    def close(self) -> None:
        self.store.close()

    def _default_policy(self) -> PolicyBackend:
        if self.config.model_endpoint:
            return HttpPolicy(endpoint=self.config.model_endpoint)
        return RulePolicy()

    def _now(self) -> datetime:
        now = self.clock()
        self.world.clock = now
        return now

    # -- users -----------------------------------------------------------

    def _load_users(self) -> None:
        for user in self.store.list_users():
            user.setdefault("location", dict(DEFAULT_LOCATION))
            if not user.get("emergency_contacts"):
                user["emergency_contacts"] = [DEFAULT_EMERGENCY_CONTACT]
            self.world.users[user["user_id"]] = user

    def register_user(self, user: dict) -> dict:
        try:
            UserDetails(user_id=user.get("user_id", ""),
                        name=user.get("name", ""), timestamp=self.clock())
        except SchemaViolation as exc:
            raise InvalidRequest(str(exc)) from exc
        if not user.get("name"):
            raise InvalidRequest("a user needs a name")
        record = {
            "user_id": user["user_id"],
            "name": user["name"],
            "phone_no": user.get("phone_no"),
            "emergency_contacts": (user.get("emergency_contacts")
                                   or [DEFAULT_EMERGENCY_CONTACT]),
            "location": user.get("location") or dict(DEFAULT_LOCATION),
        }
        with self._lock:
            self.world.add_user(record)
        return record

    def _require_user(self, user_id: str) -> None:
        if user_id not in self.world.users:
            raise UnknownUser(user_id)

    def _details(self, user_id: str) -> UserDetails:
        user = self.world.users[user_id]
        return UserDetails(user_id=user_id, name=user["name"],
                           timestamp=self.world.clock)

    # -- session engine ----------------------------------------------------

    def _new_handle(self, user_id: str, kind: str) -> SessionHandle:
        session_id = uuid.uuid4().hex[:12]
        while session_id in self.sessions:
            session_id = uuid.uuid4().hex[:12]
        handle = SessionHandle(session_id, user_id, kind, RUNNING,
                               Trajectory([]))
        self.sessions[session_id] = handle
        return handle

    def _persist(self, handle: SessionHandle) -> None:
        self.store.save_session(handle.session_id, handle.user_id,
                                handle.status,
                                handle.trajectory.to_document(),
                                handle.pending_question, handle.kind,
                                updated_at=self._now().isoformat())

    def _apply_outcome(self, handle: SessionHandle, outcome) -> None:
        handle.trajectory = outcome.trajectory
        handle.status = _OUTCOME_STATUS.get(outcome.status, FAILED)
        handle.pending_question = outcome.pending_question
        handle.failure = outcome.failure
        self._persist(handle)

    def _run_new(self, user_id: str, kind: str, query: str,
                 since_out: list[int] | None = None) -> SessionHandle:
        with self._lock:
            self._now()
            handle = self._new_handle(user_id, kind)
            if since_out is not None:
                since_out.append(0)
            outcome = run_session(query=query,
                                  user_details=self._details(user_id),
                                  world=self.world, planner=self.policy,
                                  registry=self.registry)
            self._apply_outcome(handle, outcome)
        return handle

    def _resume(self, handle: SessionHandle, answer: str) -> SessionHandle:
        with self._lock:
            self._now()
            handle.status = RUNNING
            outcome = resume_session(handle.trajectory, answer, self.world,
                                     self.policy, registry=self.registry)
            self._apply_outcome(handle, outcome)
        return handle

    def _check_failure(self, handle: SessionHandle, since: int) -> None:
        if handle.status == FAILED:
            raise SessionFailed(handle.failure or "session failed",
                                handle.snapshot(since))

    # -- chat ---------------------------------------------------------------

    def _awaiting_chat(self, user_id: str) -> SessionHandle | None:
        for handle in reversed(list(self.sessions.values())):
            if (handle.kind == "chat" and handle.user_id == user_id
                    and handle.status == AWAITING):
                return handle
        return None

    def chat(self, user_id: str, text: str,
             session_id: str | None = None) -> dict:
        """Start a session, or answer the pending question of an awaiting
        one; an explicit session_id pins the routing."""
        self._require_user(user_id)
        if not text or not text.strip():
            raise InvalidRequest("chat text must not be empty")
        if session_id is not None:
            handle = self.sessions.get(session_id)
            if handle is None:
                raise UnknownSession(session_id)
            if handle.status != AWAITING:
                raise SessionFinished(
                    f"session {session_id} is {handle.status}; "
                    "start a new one")
        else:
            handle = self._awaiting_chat(user_id)

        if handle is None:
            handle = self._run_new(user_id, "chat", text)
            since = 0
        else:
            since = len(handle.trajectory.states)
            handle = self._resume(handle, text)
        self._check_failure(handle, since)
        reply = handle.snapshot(since)
        if handle.status == COMPLETED:
            reply["notification"] = _last_notification(
                handle.trajectory, self.registry)
        return reply

    # -- vitals ---------------------------------------------------------------

    def vitals(self, user_id: str, payload: dict) -> dict:
        self._require_user(user_id)
        with self._lock:
            now = self._now()
        raw_ts = payload.get("timestamp")
        try:
            stamp = datetime.fromisoformat(raw_ts) if raw_ts else now
            sample = VitalsSample(timestamp=stamp,
                                  heart_rate=payload["heart_rate"],
                                  oxygen=payload["oxygen"],
                                  sleep=payload.get("sleep"),
                                  blood_pressure=payload.get("blood_pressure"))
        except (ValueError, TypeError, KeyError) as exc:
            raise InvalidRequest(f"bad vitals sample: {exc}") from exc
        self.store.add_vitals(user_id, sample.timestamp.isoformat(),
                              sample.heart_rate, sample.oxygen,
                              sample.sleep, sample.blood_pressure)
        decision = self.monitor.evaluate(user_id, sample)
        reply = {
            "user_id": user_id,
            "verdict": decision.abnormal,
            "triggered": decision.trigger,
            "summary": self._vitals_summary(user_id),
            "session": None,
            "alert": None,
        }
        if decision.trigger:
            handle = self._run_new(user_id, "soft_sos", decision.query)
            self._check_failure(handle, 0)
            reply["session"] = handle.snapshot()
            reply["alert"] = _last_notification(handle.trajectory,
                                                self.registry)
        return reply

    def _vitals_summary(self, user_id: str) -> dict:
        rows = self.store.vitals_for(user_id)
        return {
            "heart_rate": _metric_summary([r["heart_rate"] for r in rows]),
            "oxygen": _metric_summary([r["oxygen"] for r in rows]),
        }

    # -- SOS -------------------------------------------------------------------

    def sos(self, user_id: str, kind: str) -> dict:
        self._require_user(user_id)
        if kind not in SOS_KINDS:
            raise InvalidRequest(f"kind must be one of {SOS_KINDS}")
        if kind == "hard_end":
            if self.world.assignments.get(user_id) is None:
                raise NoActiveSos(f"no active SOS for user {user_id}")
            handle = self._run_new(user_id, "hard_sos_end",
                                   flows.HARD_SOS_END_NOTICE)
            self._check_failure(handle, 0)
            # the resolved emergency frees the ambulance
            self.world.assignments.pop(user_id, None)
        else:
            handle = self._run_new(user_id, "hard_sos_start",
                                   flows.HARD_SOS_START_NOTICE)
            self._check_failure(handle, 0)
        return handle.snapshot()

    # -- reminders and prescriptions --------------------------------------------

    def reminders(self, user_id: str) -> dict:
        self._require_user(user_id)
        rows = self.store.list_reminders(user_id=user_id)
        return {
            "user_id": user_id,
            "reminders": [{"reminder_id": r.reminder_id,
                           "medicine_name": r.medicine_name,
                           "fire_at": r.fire_at.isoformat(),
                           "status": r.status} for r in rows],
            "counts": self.store.reminder_counts(user_id),
        }

    def prescription(self, user_id: str, text: str) -> dict:
        self._require_user(user_id)
        parsed = parse_prescription(text)
        with self._lock:
            now = self._now()
        reminders = directives_to_reminders(parsed.directives, now.date(),
                                            user_id)
        self.store.add_reminders(reminders)
        return {
            "user_id": user_id,
            "directives": [{"medicine_name": d.medicine_name,
                            "dose": d.dose,
                            "times": list(d.times),
                            "frequency": d.frequency,
                            "duration_days": d.duration_days}
                           for d in parsed.directives],
            "unparsed": parsed.unparsed,
            "reminders_created": len(reminders),
        }

    def tick(self) -> list[dict]:
        """Fire due reminders once and notify their users."""
        with self._lock:
            now = self._now()
            fired = due_reminders(now, self.store)
            for r in fired:
                self.store.add_notification(
                    r.user_id, f"Medication reminder: take {r.medicine_name}.",
                    now.isoformat())
        return [{"reminder_id": r.reminder_id, "user_id": r.user_id,
                 "medicine_name": r.medicine_name,
                 "fire_at": r.fire_at.isoformat()} for r in fired]

    # -- reports ------------------------------------------------------------------

    def report(self, user_id: str, date_str: str) -> dict:
        self._require_user(user_id)
        try:
            day = date.fromisoformat(date_str)
        except ValueError as exc:
            raise InvalidRequest(f"bad date {date_str!r}: {exc}") from exc
        samples = []
        for row in self.store.vitals_for(user_id, date_str):
            samples.append(VitalsSample(
                timestamp=datetime.fromisoformat(row["timestamp"]),
                heart_rate=row["heart_rate"], oxygen=row["oxygen"],
                sleep=row["sleep"], blood_pressure=row["blood_pressure"]))
        anomalies = [message for sample in samples
                     for message in check_vitals(sample,
                                                 self.monitor.thresholds)]
        day_sessions = [
            f"{row['kind']}:{row['session_id']}"
            for row in self.store.list_sessions(user_id)
            if row["updated_at"][:10] == date_str]
        appointments = [row for row in self.store.appointment_history(user_id)
                        if row.get("appointment_date") == date_str]
        inputs = ReportInputs(user_id=user_id, date=day, vitals=samples,
                              anomalies=anomalies, sessions=day_sessions,
                              appointments=appointments,
                              reminder_counts=self.store.reminder_counts(
                                  user_id))
        report = generate_report(inputs)
        payload = report.to_dict()
        self.store.save_report(user_id, date_str, payload)
        payload["text"] = render_report_text(report)
        return payload

    # -- session log ---------------------------------------------------------------

    def session_log(self, session_id: str) -> dict:
        handle = self.sessions.get(session_id)
        if handle is None:
            raise UnknownSession(session_id)
        return handle.snapshot()

    def _load_sessions(self) -> None:
        for row in self.store.list_sessions():
            self.sessions[row["session_id"]] = SessionHandle(
                session_id=row["session_id"], user_id=row["user_id"],
                kind=row["kind"], status=row["status"],
                trajectory=Trajectory.from_document(row["trajectory"]),
                pending_question=row["pending_question"])

    def status(self) -> dict:
        return {
            "status": "ok",
            "sms_mode": self.config.sms_mode,
            "users": sorted(self.world.users),
            "sessions": len(self.sessions),
        }


# -- HTTP surface ------------------------------------------------------------

class ChatRequest(BaseModel):
    user_id: str
    text: str
    session_id: str | None = None


class VitalsRequest(BaseModel):
    user_id: str
    heart_rate: float
    oxygen: float
    timestamp: str | None = None
    sleep: dict | None = None
    blood_pressure: dict | None = None


class SosRequest(BaseModel):
    user_id: str
    kind: str


class PrescriptionRequest(BaseModel):
    user_id: str
    text: str


class RegisterRequest(BaseModel):
    user_id: str
    name: str
    phone_no: str | None = None
    emergency_contacts: list[str] | None = None
    location: dict | None = None


def create_app(config: ServiceConfig | None = None,
               runtime: HealthGateway | None = None,
               clock: Callable[[], datetime] = datetime.now,
               policy: PolicyBackend | None = None) -> FastAPI:
    runtime = runtime or HealthGateway(config=config, clock=clock,
                                       policy=policy)
    app = FastAPI(title="health assistant gateway")
    app.state.runtime = runtime
    # the console UI is served from another origin (a static file server)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(GatewayError)
    async def _gateway_error(_request, exc: GatewayError):
        return JSONResponse(status_code=exc.http_status, content=exc.payload())

    @app.exception_handler(UnknownUser)
    async def _unknown_user(_request, exc: UnknownUser):
        return JSONResponse(status_code=404,
                            content={"error": "UnknownUser",
                                     "detail": str(exc)})

    @app.exception_handler(EmptyPrescription)
    async def _empty_prescription(_request, exc: EmptyPrescription):
        return JSONResponse(status_code=400,
                            content={"error": "EmptyPrescription",
                                     "detail": str(exc)})

    @app.get("/status")
    def status():
        return runtime.status()

    @app.post("/users")
    def register(req: RegisterRequest):
        return runtime.register_user(req.model_dump())

    @app.post("/chat")
    def chat(req: ChatRequest):
        return runtime.chat(req.user_id, req.text, req.session_id)

    @app.post("/vitals")
    def vitals(req: VitalsRequest):
        payload = req.model_dump()
        payload.pop("user_id")
        return runtime.vitals(req.user_id, payload)

    @app.post("/sos")
    def sos(req: SosRequest):
        return runtime.sos(req.user_id, req.kind)

    @app.post("/prescription")
    def prescription(req: PrescriptionRequest):
        return runtime.prescription(req.user_id, req.text)

    @app.get("/reminders")
    def reminders(user_id: str):
        return runtime.reminders(user_id)

    @app.get("/report")
    def report(user_id: str, date: str):
        return runtime.report(user_id, date)

    @app.get("/sessions/{session_id}/log")
    def session_log(session_id: str):
        return runtime.session_log(session_id)

    return app


def _probe_port(port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind(("127.0.0.1", port))
    except OSError as exc:
        raise ConfigError(f"port {port} is not available: {exc}") from exc
    finally:
        probe.close()


def _start_scheduler(runtime: HealthGateway) -> threading.Thread:
    def loop():
        while True:
            time.sleep(runtime.config.tick_seconds)
            runtime.tick()

    thread = threading.Thread(target=loop, daemon=True,
                              name="reminder-scheduler")
    thread.start()
    return thread


def serve(config: ServiceConfig | None = None) -> None:
    """Run the gateway under uvicorn; raises ConfigError before binding
    when the port is taken or the SMS adapter cannot be built."""
    import uvicorn

    config = config or ServiceConfig.from_env()
    _probe_port(config.port)
    runtime = HealthGateway(config=config)
    _start_scheduler(runtime)
    app = create_app(runtime=runtime)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
