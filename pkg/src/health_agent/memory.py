"""Session memory and the persistent per-user store.

Long-term records live in a single sqlite file (local-first, one writer
lock, commit per write) so the assistant works with no external services.
Complaint retrieval matches on shared SYMPTOM entities, falling back to
content-word overlap when either side has no recognizable symptom phrase.
"""

from __future__ import annotations

import json
import re
import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Iterable

from .diseases import SYMPTOM_LEXICON
from .health import DOSE_RE, Reminder


class UnknownUser(Exception):
    """The user id is not registered in the store."""


# -- rule-based entity extraction -------------------------------------------

_SYMPTOM_RE = re.compile(
    r"\b(" + "|".join(sorted((re.escape(s) for s in SYMPTOM_LEXICON),
                             key=len, reverse=True)) + r")\b")
_DATE_RE = re.compile(r"\b(\d{4}-\d{2}-\d{2}|\d{2}/\d{2}/\d{4})\b")
_TIME_RE = re.compile(r"\b\d{2}:\d{2}(?:-\d{2}:\d{2})?\b")
_PERSON_RE = re.compile(r"\bDr\.?\s+[A-Z][a-zA-Z]+(?:\s+[A-Z][a-zA-Z]+)*")

STOP_WORDS = frozenset(
    "a an and are been but day days few feeling for from get had hard has have "
    "i in is it its lately me my no not of on or past so some the these "
    "through to very with".split())


def extract_entities(text: str) -> list[tuple[str, str]]:
    """(surface, label) pairs with label in SYMPTOM|DATE|TIME|PERSON|MEDICINE."""
    found = []
    for m in _SYMPTOM_RE.finditer(text.lower()):
        found.append((m.start(), m.group(0), "SYMPTOM"))
    for m in _DATE_RE.finditer(text):
        found.append((m.start(), m.group(0), "DATE"))
    for m in _TIME_RE.finditer(text):
        found.append((m.start(), m.group(0), "TIME"))
    for m in _PERSON_RE.finditer(text):
        found.append((m.start(), m.group(0), "PERSON"))
    for m in DOSE_RE.finditer(text):
        before = text[:m.start()].rstrip()
        words = re.findall(r"[A-Za-z][A-Za-z\-]*", before)
        if words:
            found.append((m.start(), words[-1], "MEDICINE"))
    found.sort(key=lambda t: t[0])
    return [(surface, label) for _, surface, label in found]


def symptom_entities(text: str) -> set[str]:
    return {s for s, label in extract_entities(text) if label == "SYMPTOM"}


def content_words(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower())) - STOP_WORDS


def complaint_score(query: str, record_symptoms: str) -> int:
    """Shared-entity count, or shared content words when entities are absent."""
    q_sym, r_sym = symptom_entities(query), symptom_entities(record_symptoms)
    if q_sym and r_sym:
        return len(q_sym & r_sym)
    return len(content_words(query) & content_words(record_symptoms))


def match_complaints(records: Iterable[dict], symptoms: str,
                     date_range: dict | None = None,
                     top_k: int | None = 3) -> list[dict]:
    """Records sharing symptoms with the query: highest overlap first,
    newest on ties. Each record needs ``date`` and ``symptoms`` keys."""
    start = (date_range or {}).get("start_date")
    end = (date_range or {}).get("end_date")
    scored = []
    for rec in records:
        if start and rec["date"] < start:
            continue
        if end and rec["date"] > end:
            continue
        score = complaint_score(symptoms, rec["symptoms"])
        if score > 0:
            scored.append((score, rec))
    scored.sort(key=lambda sr: (sr[0], sr[1]["date"]), reverse=True)
    out = [rec for _, rec in scored]
    return out[:top_k] if top_k is not None else out


@dataclass
class ShortTermMemory:
    """Per-session working context; cleared when the episode completes."""

    session_id: str
    user_id: str
    symptoms: list[str] = field(default_factory=list)
    open_question: str | None = None
    turns: list[str] = field(default_factory=list)

    def clear(self) -> None:
        self.symptoms.clear()
        self.open_question = None
        self.turns.clear()


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    phone_no TEXT,
    emergency_contacts TEXT NOT NULL DEFAULT '[]'
);
CREATE TABLE IF NOT EXISTS symptom_records (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id TEXT NOT NULL,
    date TEXT NOT NULL,
    symptoms TEXT NOT NULL,
    timestamp TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS appointments (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id TEXT NOT NULL,
    specialist_id TEXT NOT NULL,
    symptoms TEXT,
    appointment_date TEXT,
    appointment_time TEXT,
    appointment_time_date TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS notifications (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id TEXT NOT NULL,
    message TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS vitals (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id TEXT NOT NULL,
    timestamp TEXT NOT NULL,
    heart_rate REAL NOT NULL,
    oxygen REAL NOT NULL,
    sleep TEXT,
    blood_pressure TEXT
);
CREATE TABLE IF NOT EXISTS reminders (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id TEXT NOT NULL,
    medicine_name TEXT NOT NULL,
    fire_at TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'pending'
);
CREATE TABLE IF NOT EXISTS reports (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id TEXT NOT NULL,
    date TEXT NOT NULL,
    payload TEXT NOT NULL,
    UNIQUE (user_id, date)
);
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    user_id TEXT NOT NULL,
    status TEXT NOT NULL,
    pending_question TEXT,
    kind TEXT NOT NULL DEFAULT 'chat',
    trajectory TEXT NOT NULL,
    updated_at TEXT NOT NULL
);
"""

_COLLECTIONS = ("users", "symptom_records", "appointments", "notifications",
                "vitals", "reminders", "reports", "sessions")


class LongTermStore:
    """Single-file persistent store; safe for many threads in one process."""

    def __init__(self, path: str = ":memory:"):
        self.path = path
        self._lock = threading.RLock()
        self._db = sqlite3.connect(path, check_same_thread=False)
        self._db.row_factory = sqlite3.Row
        with self._lock:
            self._db.executescript(_SCHEMA)
            self._db.commit()

    def close(self) -> None:
        with self._lock:
            self._db.close()

    # -- users ---------------------------------------------------------

    def ensure_user(self, user_id: str, name: str, phone_no: str | None = None,
                    emergency_contacts: list[str] | None = None) -> None:
        with self._lock:
            self._db.execute(
                "INSERT INTO users (user_id, name, phone_no, emergency_contacts) "
                "VALUES (?, ?, ?, ?) ON CONFLICT(user_id) DO UPDATE SET "
                "name = excluded.name, "
                "phone_no = COALESCE(excluded.phone_no, users.phone_no), "
                "emergency_contacts = CASE WHEN excluded.emergency_contacts != '[]' "
                "THEN excluded.emergency_contacts ELSE users.emergency_contacts END",
                (user_id, name, phone_no, json.dumps(emergency_contacts or [])))
            self._db.commit()

    def get_user(self, user_id: str) -> dict:
        with self._lock:
            row = self._db.execute(
                "SELECT * FROM users WHERE user_id = ?", (user_id,)).fetchone()
        if row is None:
            raise UnknownUser(user_id)
        d = dict(row)
        d["emergency_contacts"] = json.loads(d["emergency_contacts"])
        return d

    def has_user(self, user_id: str) -> bool:
        with self._lock:
            row = self._db.execute(
                "SELECT 1 FROM users WHERE user_id = ?", (user_id,)).fetchone()
        return row is not None

    def list_users(self) -> list[dict]:
        with self._lock:
            rows = self._db.execute("SELECT * FROM users ORDER BY user_id").fetchall()
        out = []
        for row in rows:
            d = dict(row)
            d["emergency_contacts"] = json.loads(d["emergency_contacts"])
            out.append(d)
        return out

    def _require_user(self, user_id: str) -> None:
        if not self.has_user(user_id):
            raise UnknownUser(user_id)

    # -- symptoms --------------------------------------------------------

    def add_symptom_record(self, user_id: str, symptoms: str, timestamp: str) -> int:
        if not symptoms or not symptoms.strip():
            raise ValueError("symptoms must be non-empty")
        self._require_user(user_id)
        date = timestamp[:10]
        with self._lock:
            cur = self._db.execute(
                "INSERT INTO symptom_records (user_id, date, symptoms, timestamp) "
                "VALUES (?, ?, ?, ?)", (user_id, date, symptoms, timestamp))
            self._db.commit()
            return cur.lastrowid

    def symptom_records(self, user_id: str) -> list[dict]:
        with self._lock:
            rows = self._db.execute(
                "SELECT * FROM symptom_records WHERE user_id = ? ORDER BY id",
                (user_id,)).fetchall()
        return [dict(r) for r in rows]

    def query_past_complaints(self, user_id: str, symptoms: str,
                              date_range: dict | None = None,
                              top_k: int | None = 3) -> list[dict]:
        records = self.symptom_records(user_id)
        matched = match_complaints(records, symptoms, date_range, top_k)
        return [{"date": r["date"], "symptoms": r["symptoms"]} for r in matched]

    # -- appointments ----------------------------------------------------

    def add_appointment(self, user_id: str, specialist_id: str,
                        appointment_time_date: str, symptoms: str | None = None,
                        date: str | None = None, time: str | None = None) -> int:
        self._require_user(user_id)
        with self._lock:
            cur = self._db.execute(
                "INSERT INTO appointments (user_id, specialist_id, symptoms, "
                "appointment_date, appointment_time, appointment_time_date) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (user_id, specialist_id, symptoms, date, time, appointment_time_date))
            self._db.commit()
            return cur.lastrowid

    def appointment_history(self, user_id: str) -> list[dict]:
        with self._lock:
            rows = self._db.execute(
                "SELECT * FROM appointments WHERE user_id = ? ORDER BY id",
                (user_id,)).fetchall()
        return [dict(r) for r in rows]

    # -- notifications ----------------------------------------------------

    def add_notification(self, user_id: str, message: str,
                         created_at: str | None = None) -> int:
        with self._lock:
            cur = self._db.execute(
                "INSERT INTO notifications (user_id, message, created_at) VALUES (?, ?, ?)",
                (user_id, message, created_at or datetime.now().isoformat()))
            self._db.commit()
            return cur.lastrowid

    def notifications(self, user_id: str) -> list[dict]:
        with self._lock:
            rows = self._db.execute(
                "SELECT * FROM notifications WHERE user_id = ? ORDER BY id",
                (user_id,)).fetchall()
        return [dict(r) for r in rows]

    # -- vitals -----------------------------------------------------------

    def add_vitals(self, user_id: str, timestamp: str, heart_rate: float,
                   oxygen: float, sleep: dict | None = None,
                   blood_pressure: dict | None = None) -> int:
        with self._lock:
            cur = self._db.execute(
                "INSERT INTO vitals (user_id, timestamp, heart_rate, oxygen, sleep, "
                "blood_pressure) VALUES (?, ?, ?, ?, ?, ?)",
                (user_id, timestamp, heart_rate, oxygen,
                 json.dumps(sleep) if sleep is not None else None,
                 json.dumps(blood_pressure) if blood_pressure is not None else None))
            self._db.commit()
            return cur.lastrowid

    def vitals_for(self, user_id: str, date: str | None = None) -> list[dict]:
        q = "SELECT * FROM vitals WHERE user_id = ?"
        args: list[Any] = [user_id]
        if date is not None:
            q += " AND substr(timestamp, 1, 10) = ?"
            args.append(date)
        with self._lock:
            rows = self._db.execute(q + " ORDER BY id", args).fetchall()
        out = []
        for row in rows:
            d = dict(row)
            d["sleep"] = json.loads(d["sleep"]) if d["sleep"] else None
            d["blood_pressure"] = (json.loads(d["blood_pressure"])
                                   if d["blood_pressure"] else None)
            out.append(d)
        return out

    # -- reminders ----------------------------------------------------------

    def add_reminders(self, reminders: Iterable[Reminder]) -> list[int]:
        ids = []
        with self._lock:
            for r in reminders:
                cur = self._db.execute(
                    "INSERT INTO reminders (user_id, medicine_name, fire_at, status) "
                    "VALUES (?, ?, ?, ?)",
                    (r.user_id, r.medicine_name, r.fire_at.isoformat(), r.status))
                ids.append(cur.lastrowid)
            self._db.commit()
        return ids

    def list_reminders(self, user_id: str | None = None,
                       status: str | None = None) -> list[Reminder]:
        q, args = "SELECT * FROM reminders", []
        clauses = []
        if user_id is not None:
            clauses.append("user_id = ?")
            args.append(user_id)
        if status is not None:
            clauses.append("status = ?")
            args.append(status)
        if clauses:
            q += " WHERE " + " AND ".join(clauses)
        with self._lock:
            rows = self._db.execute(q + " ORDER BY fire_at, id", args).fetchall()
        return [Reminder(user_id=r["user_id"], medicine_name=r["medicine_name"],
                         fire_at=datetime.fromisoformat(r["fire_at"]),
                         status=r["status"], reminder_id=r["id"]) for r in rows]

    def mark_reminder(self, reminder_id: int, status: str) -> None:
        with self._lock:
            self._db.execute("UPDATE reminders SET status = ? WHERE id = ?",
                             (status, reminder_id))
            self._db.commit()

    def reminder_counts(self, user_id: str) -> dict[str, int]:
        with self._lock:
            rows = self._db.execute(
                "SELECT status, COUNT(*) AS n FROM reminders WHERE user_id = ? "
                "GROUP BY status", (user_id,)).fetchall()
        counts = {"pending": 0, "fired": 0, "dismissed": 0}
        for row in rows:
            counts[row["status"]] = row["n"]
        return counts

    # -- reports ------------------------------------------------------------

    def save_report(self, user_id: str, date: str, payload: dict) -> None:
        with self._lock:
            self._db.execute(
                "INSERT INTO reports (user_id, date, payload) VALUES (?, ?, ?) "
                "ON CONFLICT(user_id, date) DO UPDATE SET payload = excluded.payload",
                (user_id, date, json.dumps(payload)))
            self._db.commit()

    def get_report(self, user_id: str, date: str) -> dict | None:
        with self._lock:
            row = self._db.execute(
                "SELECT payload FROM reports WHERE user_id = ? AND date = ?",
                (user_id, date)).fetchone()
        return json.loads(row["payload"]) if row else None

    # -- sessions -------------------------------------------------------------

    def save_session(self, session_id: str, user_id: str, status: str,
                     trajectory_doc: dict, pending_question: str | None = None,
                     kind: str = "chat", updated_at: str | None = None) -> None:
        with self._lock:
            self._db.execute(
                "INSERT INTO sessions (session_id, user_id, status, pending_question, "
                "kind, trajectory, updated_at) VALUES (?, ?, ?, ?, ?, ?, ?) "
                "ON CONFLICT(session_id) DO UPDATE SET status = excluded.status, "
                "pending_question = excluded.pending_question, "
                "trajectory = excluded.trajectory, updated_at = excluded.updated_at",
                (session_id, user_id, status, pending_question, kind,
                 json.dumps(trajectory_doc),
                 updated_at or datetime.now().isoformat()))
            self._db.commit()

    def get_session(self, session_id: str) -> dict | None:
        with self._lock:
            row = self._db.execute(
                "SELECT * FROM sessions WHERE session_id = ?", (session_id,)).fetchone()
        if row is None:
            return None
        d = dict(row)
        d["trajectory"] = json.loads(d["trajectory"])
        return d

    def list_sessions(self, user_id: str | None = None) -> list[dict]:
        q, args = "SELECT * FROM sessions", []
        if user_id is not None:
            q += " WHERE user_id = ?"
            args.append(user_id)
        with self._lock:
            rows = self._db.execute(q + " ORDER BY updated_at, session_id", args).fetchall()
        out = []
        for row in rows:
            d = dict(row)
            d["trajectory"] = json.loads(d["trajectory"])
            out.append(d)
        return out

    # -- export / import -------------------------------------------------------

    def export_jsonl(self, path: str) -> int:
        """One {"collection", "record"} line per row; returns line count."""
        n = 0
        with self._lock, open(path, "w", encoding="utf-8") as fh:
            for table in _COLLECTIONS:
                for row in self._db.execute(f"SELECT * FROM {table}"):
                    fh.write(json.dumps({"collection": table,
                                         "record": dict(row)}) + "\n")
                    n += 1
        return n

    def import_jsonl(self, path: str) -> int:
        n = 0
        with self._lock, open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                table, record = entry["collection"], entry["record"]
                if table not in _COLLECTIONS:
                    raise ValueError(f"unknown collection {table!r}")
                cols = ", ".join(record)
                marks = ", ".join("?" for _ in record)
                self._db.execute(
                    f"INSERT OR REPLACE INTO {table} ({cols}) VALUES ({marks})",
                    tuple(record.values()))
                n += 1
            self._db.commit()
        return n
