"""Health manager: vitals screening, prescription parsing, reminders, reports.

Vitals bounds are inclusive normal ranges; a sample outside any range is
abnormal and (subject to a per-metric cool-down) starts a soft-SOS session
whose user message mirrors the recorded soft-SOS episodes exactly.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Any, Iterable


class EmptyPrescription(Exception):
    """The prescription text holds no content."""


@dataclass(frozen=True)
class VitalsSample:
    timestamp: datetime
    heart_rate: float
    oxygen: float
    sleep: dict | None = None
    blood_pressure: tuple[float, float] | None = None

    def __post_init__(self):
        if self.heart_rate <= 0:
            raise ValueError("heart_rate must be positive")
        if not 0 < self.oxygen <= 100:
            raise ValueError("oxygen must be in (0, 100]")
        if self.sleep and any(v < 0 for v in self.sleep.values()):
            raise ValueError("sleep minutes must be non-negative")


@dataclass(frozen=True)
class VitalsThresholds:
    """Inclusive normal ranges per metric."""

    heart_rate: tuple[float, float] = (60, 100)
    oxygen: tuple[float, float] = (95, 100)
    systolic: tuple[float, float] = (90, 140)
    diastolic: tuple[float, float] = (60, 90)

    def __post_init__(self):
        for name in ("heart_rate", "oxygen", "systolic", "diastolic"):
            lo, hi = getattr(self, name)
            if lo >= hi:
                raise ValueError(f"{name}: min must be below max")


def check_vitals(sample: VitalsSample, thresholds: VitalsThresholds) -> list[str]:
    """Names of metrics outside their normal range; empty means normal."""
    out = []
    lo, hi = thresholds.heart_rate
    if not lo <= sample.heart_rate <= hi:
        out.append("heart_rate")
    lo, hi = thresholds.oxygen
    if not lo <= sample.oxygen <= hi:
        out.append("oxygen")
    if sample.blood_pressure is not None:
        systolic, diastolic = sample.blood_pressure
        lo, hi = thresholds.systolic
        if not lo <= systolic <= hi:
            out.append("systolic")
        lo, hi = thresholds.diastolic
        if not lo <= diastolic <= hi:
            out.append("diastolic")
    return out


def _plain(x: float) -> int | float:
    return int(x) if float(x).is_integer() else x


def soft_sos_query(sample: VitalsSample) -> str:
    """The user-state text that opens a soft-SOS session."""
    vitals: dict[str, Any] = {
        "oxygen": _plain(sample.oxygen),
        "heart_rate": _plain(sample.heart_rate),
    }
    if sample.sleep is not None:
        vitals["sleep"] = {k: _plain(v) for k, v in sample.sleep.items()}
    if sample.blood_pressure is not None:
        vitals["blood_pressure"] = {
            "systolic": _plain(sample.blood_pressure[0]),
            "diastolic": _plain(sample.blood_pressure[1]),
        }
    return f"Soft SOS triggered. Abnormal Vitals: {vitals!r}"


def soft_sos_alert_text(heart_rate: float, oxygen: float) -> str:
    return (
        "Soft SOS triggered. Abnormal vitals detected.\n"
        "If you are feeling unwell, contact emergency services or book an appointment.\n\n"
        "Your Vitals-\n"
        f"Heart Rate: {_plain(heart_rate)} bps\n"
        f"Oxygen: {_plain(oxygen)}"
    )


def soft_sos_alert(sample: VitalsSample) -> str:
    """The notification text the agents send back for abnormal vitals."""
    return soft_sos_alert_text(sample.heart_rate, sample.oxygen)


def parse_soft_sos_query(query: str) -> dict:
    """The vitals mapping embedded in a soft-SOS query text."""
    brace = query.find("{")
    if brace < 0:
        raise ValueError(f"no vitals found in {query!r}")
    vitals = ast.literal_eval(query[brace:])
    if not isinstance(vitals, dict):
        raise ValueError(f"vitals must be a mapping, got {type(vitals).__name__}")
    return vitals


@dataclass
class MonitorDecision:
    abnormal: list[str]
    trigger: bool
    query: str | None = None


class VitalsMonitor:
    """Screens samples and rate-limits soft-SOS triggers.

    At most one trigger per metric per cool-down window; a sample whose
    abnormal metrics are all inside their windows is reported abnormal but
    does not trigger.
    """

    def __init__(self, thresholds: VitalsThresholds | None = None,
                 cooldown: timedelta = timedelta(minutes=30)):
        self.thresholds = thresholds or VitalsThresholds()
        self.cooldown = cooldown
        self._last_fire: dict[tuple[str, str], datetime] = {}

    def evaluate(self, user_id: str, sample: VitalsSample) -> MonitorDecision:
        abnormal = check_vitals(sample, self.thresholds)
        if not abnormal:
            return MonitorDecision([], trigger=False)
        now = sample.timestamp
        open_metrics = [
            m for m in abnormal
            if (user_id, m) not in self._last_fire
            or now - self._last_fire[(user_id, m)] >= self.cooldown
        ]
        if not open_metrics:
            return MonitorDecision(abnormal, trigger=False)
        for m in abnormal:
            self._last_fire[(user_id, m)] = now
        return MonitorDecision(abnormal, trigger=True, query=soft_sos_query(sample))


# -- prescriptions ----------------------------------------------------------

@dataclass(frozen=True)
class MedicationDirective:
    medicine_name: str
    dose: str
    times: tuple[str, ...]
    frequency: int
    duration_days: int

    def __post_init__(self):
        if self.frequency < 1:
            raise ValueError("frequency must be at least 1")
        if self.duration_days < 1:
            raise ValueError("duration must be at least 1 day")
        if len(self.times) != self.frequency:
            raise ValueError("times count must equal frequency")


@dataclass
class PrescriptionParse:
    directives: list[MedicationDirective]
    unparsed: list[str]


DOSE_RE = re.compile(
    r"\b(\d+(?:\.\d+)?)\s?(mg|mcg|g|ml|units?|tablets?|capsules?|drops?|puffs?)\b",
    re.IGNORECASE)

_WORD_FREQ = {"once": 1, "twice": 2, "thrice": 3}
_FREQ_RE = re.compile(
    r"\b(?:(once|twice|thrice)|(\d+)\s*times?)\s*(?:a\s+day|daily|per\s+day)?\b",
    re.IGNORECASE)
_DURATION_RE = re.compile(r"\b(?:for\s+)?(\d+)\s*(day|week)s?\b", re.IGNORECASE)
_TIME_RE = re.compile(r"\b([01]?\d|2[0-3]):([0-5]\d)\b")

DEFAULT_TIMES = {
    1: ("09:00",),
    2: ("09:00", "21:00"),
    3: ("09:00", "14:00", "21:00"),
    4: ("08:00", "12:00", "16:00", "20:00"),
}


def _default_times(frequency: int) -> tuple[str, ...]:
    if frequency in DEFAULT_TIMES:
        return DEFAULT_TIMES[frequency]
    # spread evenly across the waking window
    span_minutes = 12 * 60
    step = span_minutes // (frequency - 1)
    return tuple(f"{8 + (i * step) // 60:02d}:{(i * step) % 60:02d}"
                 for i in range(frequency))


def _parse_line(line: str) -> MedicationDirective | None:
    dose_m = DOSE_RE.search(line)
    if not dose_m:
        return None
    freq_m = _FREQ_RE.search(line, dose_m.end())
    duration_m = _DURATION_RE.search(line, dose_m.end())
    if not freq_m or not duration_m:
        return None
    name = re.sub(r"[\s\-–—:,]+$", "", line[:dose_m.start()]).strip()
    if not name:
        return None
    frequency = _WORD_FREQ[freq_m.group(1).lower()] if freq_m.group(1) \
        else int(freq_m.group(2))
    if frequency < 1:
        return None
    duration = int(duration_m.group(1))
    if duration_m.group(2).lower() == "week":
        duration *= 7
    if duration < 1:
        return None
    explicit = tuple(f"{int(h):02d}:{m}" for h, m in _TIME_RE.findall(line))
    times = explicit if len(explicit) == frequency else _default_times(frequency)
    dose = f"{dose_m.group(1)}{dose_m.group(2).lower()}"
    return MedicationDirective(name, dose, times, frequency, duration)


def parse_prescription(text: str) -> PrescriptionParse:
    """Extract medication directives line by line.

    Lines that do not parse are returned in ``unparsed``, never dropped.
    """
    if not text or not text.strip():
        raise EmptyPrescription("no prescription content")
    directives, unparsed = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        d = _parse_line(line)
        if d is None:
            unparsed.append(line)
        else:
            directives.append(d)
    return PrescriptionParse(directives, unparsed)


# -- reminders --------------------------------------------------------------

@dataclass
class Reminder:
    user_id: str
    medicine_name: str
    fire_at: datetime
    status: str = "pending"
    reminder_id: int | None = None


def directives_to_reminders(directives: Iterable[MedicationDirective],
                            start_date: date, user_id: str) -> list[Reminder]:
    out = []
    for d in directives:
        for day in range(d.duration_days):
            for hhmm in d.times:
                hour, minute = map(int, hhmm.split(":"))
                fire_at = datetime.combine(start_date + timedelta(days=day),
                                           time(hour, minute))
                out.append(Reminder(user_id, d.medicine_name, fire_at))
    return out


def due_reminders(now: datetime, store) -> list[Reminder]:
    """Pending reminders with fire_at <= now, marked fired exactly once."""
    due = [r for r in store.list_reminders(status="pending") if r.fire_at <= now]
    for r in due:
        store.mark_reminder(r.reminder_id, "fired")
        r.status = "fired"
    return due


# -- daily report -----------------------------------------------------------

@dataclass
class ReportInputs:
    user_id: str
    date: date
    vitals: list[VitalsSample] = field(default_factory=list)
    anomalies: list[str] = field(default_factory=list)
    sessions: list[str] = field(default_factory=list)
    appointments: list[dict] = field(default_factory=list)
    reminder_counts: dict[str, int] = field(default_factory=dict)


@dataclass
class DailyReport:
    user_id: str
    date: str
    vitals_summary: dict[str, dict[str, float]]
    anomalies: list[str]
    sessions: list[str]
    appointments: list[dict]
    reminder_counts: dict[str, int]
    narrative: str | None = None

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id, "date": self.date,
            "vitals_summary": self.vitals_summary, "anomalies": self.anomalies,
            "sessions": self.sessions, "appointments": self.appointments,
            "reminder_counts": self.reminder_counts, "narrative": self.narrative,
        }


def _summary(values: list[float]) -> dict[str, float]:
    if not values:
        return {"min": 0, "max": 0, "mean": 0, "count": 0}
    return {"min": min(values), "max": max(values),
            "mean": sum(values) / len(values), "count": len(values)}


def render_report_text(report: DailyReport) -> str:
    lines = [f"Daily health report for {report.user_id} on {report.date}"]
    for metric, stats in report.vitals_summary.items():
        lines.append(f"  {metric}: min {stats['min']} max {stats['max']} "
                     f"mean {round(stats['mean'], 2)} over {int(stats['count'])} samples")
    lines.append(f"  anomalies: {len(report.anomalies)}")
    lines.extend(f"    - {a}" for a in report.anomalies)
    lines.append(f"  sessions: {len(report.sessions)}")
    lines.append(f"  appointments: {len(report.appointments)}")
    counts = report.reminder_counts
    lines.append("  reminders: "
                 f"{counts.get('fired', 0)} fired, {counts.get('pending', 0)} pending, "
                 f"{counts.get('dismissed', 0)} dismissed")
    return "\n".join(lines)


def generate_report(inputs: ReportInputs, backend=None) -> DailyReport:
    """Template-based report; a backend, when given, adds a narrative.

    Backend failure degrades to the template-only report.
    """
    report = DailyReport(
        user_id=inputs.user_id,
        date=inputs.date.isoformat(),
        vitals_summary={
            "heart_rate": _summary([s.heart_rate for s in inputs.vitals]),
            "oxygen": _summary([s.oxygen for s in inputs.vitals]),
        },
        anomalies=list(inputs.anomalies),
        sessions=list(inputs.sessions),
        appointments=list(inputs.appointments),
        reminder_counts=dict(inputs.reminder_counts),
    )
    if backend is not None:
        prompt = ("Summarize this daily health report in one short paragraph:\n"
                  + render_report_text(report))
        try:
            report.narrative = backend.complete(prompt, role="planner").strip()
        except Exception:
            report.narrative = None
    return report
