"""Vitals screening, soft-SOS texts, prescriptions, reminders, reports."""

import json
from datetime import date, datetime, timedelta
from pathlib import Path

import pytest

from health_agent.goldens import load_golden
from health_agent.health import (
    DEFAULT_TIMES,
    EmptyPrescription,
    MedicationDirective,
    Reminder,
    ReportInputs,
    VitalsMonitor,
    VitalsSample,
    VitalsThresholds,
    check_vitals,
    directives_to_reminders,
    due_reminders,
    generate_report,
    parse_prescription,
    render_report_text,
    soft_sos_alert,
    soft_sos_query,
)

T0 = datetime(2025, 2, 1, 8, 11)


def sample(hr=75, oxygen=98, bp=None, sleep=None, at=T0):
    return VitalsSample(timestamp=at, heart_rate=hr, oxygen=oxygen,
                        sleep=sleep, blood_pressure=bp)


class TestCheckVitals:
    def test_normal_sample_flags_nothing(self):
        assert check_vitals(sample(), VitalsThresholds()) == []

    @pytest.mark.parametrize("hr", [60, 100, 80.5])
    def test_heart_rate_bounds_inclusive(self, hr):
        assert check_vitals(sample(hr=hr), VitalsThresholds()) == []

    @pytest.mark.parametrize("hr", [59, 59.9, 101, 41, 180])
    def test_heart_rate_out_of_range(self, hr):
        assert check_vitals(sample(hr=hr), VitalsThresholds()) == ["heart_rate"]

    @pytest.mark.parametrize("ox", [95, 100])
    def test_oxygen_bounds_inclusive(self, ox):
        assert check_vitals(sample(oxygen=ox), VitalsThresholds()) == []

    @pytest.mark.parametrize("ox", [94.9, 85, 50])
    def test_oxygen_out_of_range(self, ox):
        assert check_vitals(sample(oxygen=ox), VitalsThresholds()) == ["oxygen"]

    def test_blood_pressure_bounds_inclusive(self):
        assert check_vitals(sample(bp=(90, 60)), VitalsThresholds()) == []
        assert check_vitals(sample(bp=(140, 90)), VitalsThresholds()) == []

    def test_blood_pressure_out_of_range(self):
        assert check_vitals(sample(bp=(89, 75)), VitalsThresholds()) == ["systolic"]
        assert check_vitals(sample(bp=(120, 91)), VitalsThresholds()) == ["diastolic"]
        assert check_vitals(sample(bp=(141, 59)), VitalsThresholds()) == [
            "systolic", "diastolic"]

    def test_missing_blood_pressure_is_not_checked(self):
        assert check_vitals(sample(bp=None), VitalsThresholds()) == []

    def test_fixed_reporting_order(self):
        flagged = check_vitals(sample(hr=41, oxygen=85, bp=(150, 95)),
                               VitalsThresholds())
        assert flagged == ["heart_rate", "oxygen", "systolic", "diastolic"]

    def test_custom_thresholds(self):
        tight = VitalsThresholds(heart_rate=(70, 80))
        assert check_vitals(sample(hr=65), tight) == ["heart_rate"]

    def test_threshold_bounds_must_be_ordered(self):
        with pytest.raises(ValueError):
            VitalsThresholds(oxygen=(100, 95))

    @pytest.mark.parametrize("kwargs", [
        {"hr": 0}, {"hr": -10}, {"oxygen": 0}, {"oxygen": 101},
        {"sleep": {"deep": -1}},
    ])
    def test_sample_rejects_impossible_values(self, kwargs):
        with pytest.raises(ValueError):
            sample(**kwargs)


class TestSosTexts:
    def golden_vitals(self):
        return sample(hr=41, oxygen=85,
                      sleep={"deep": 75, "light": 238, "rem": 94, "awake": 44})

    def test_query_matches_recorded_episode(self):
        golden = load_golden("soft_sos")
        user_text = golden.states[1].payload
        assert soft_sos_query(self.golden_vitals()) == user_text

    def test_alert_matches_recorded_notification(self):
        golden = load_golden("soft_sos")
        notify = next(s for s in golden.states if s.kind == "caller")
        assert soft_sos_alert(self.golden_vitals()) == notify.payload.parameters["symptoms"]

    def test_whole_floats_render_as_integers(self):
        s = sample(hr=41.0, oxygen=85.0, sleep={"deep": 75.0})
        assert "'oxygen': 85," in soft_sos_query(s)
        assert "'deep': 75" in soft_sos_query(s)
        assert "Heart Rate: 41 bps" in soft_sos_alert(s)

    def test_fractional_values_survive(self):
        s = sample(hr=41.5, oxygen=85)
        assert "'heart_rate': 41.5" in soft_sos_query(s)

    def test_blood_pressure_included_when_present(self):
        s = sample(hr=41, oxygen=85, bp=(150, 95))
        assert "'blood_pressure': {'systolic': 150, 'diastolic': 95}" in soft_sos_query(s)


class TestVitalsMonitor:
    def test_normal_sample_never_triggers(self):
        monitor = VitalsMonitor()
        decision = monitor.evaluate("U1", sample())
        assert decision.abnormal == []
        assert not decision.trigger
        assert decision.query is None

    def test_abnormal_sample_triggers_with_query(self):
        monitor = VitalsMonitor()
        s = sample(hr=41, oxygen=85)
        decision = monitor.evaluate("U1", s)
        assert decision.trigger
        assert decision.abnormal == ["heart_rate", "oxygen"]
        assert decision.query == soft_sos_query(s)

    def test_cooldown_suppresses_repeat_triggers(self):
        monitor = VitalsMonitor()
        assert monitor.evaluate("U1", sample(hr=41)).trigger
        again = monitor.evaluate("U1", sample(hr=42, at=T0 + timedelta(minutes=29)))
        assert again.abnormal == ["heart_rate"]
        assert not again.trigger

    def test_cooldown_expires_at_the_boundary(self):
        monitor = VitalsMonitor()
        monitor.evaluate("U1", sample(hr=41))
        later = monitor.evaluate("U1", sample(hr=41, at=T0 + timedelta(minutes=30)))
        assert later.trigger

    def test_new_metric_fires_during_other_cooldown(self):
        monitor = VitalsMonitor()
        monitor.evaluate("U1", sample(hr=41))
        mixed = monitor.evaluate("U1", sample(hr=41, oxygen=85,
                                              at=T0 + timedelta(minutes=10)))
        assert mixed.trigger
        # the trigger refreshed every abnormal metric's window
        third = monitor.evaluate("U1", sample(hr=41, oxygen=85,
                                              at=T0 + timedelta(minutes=35)))
        assert not third.trigger

    def test_cooldown_tracked_per_user(self):
        monitor = VitalsMonitor()
        monitor.evaluate("U1", sample(hr=41))
        assert monitor.evaluate("U2", sample(hr=41)).trigger

    def test_custom_cooldown(self):
        monitor = VitalsMonitor(cooldown=timedelta(minutes=5))
        monitor.evaluate("U1", sample(hr=41))
        assert monitor.evaluate("U1", sample(hr=41, at=T0 + timedelta(minutes=5))).trigger


class TestPrescriptionParsing:
    corpus = json.loads(
        (Path(__file__).parent / "data" / "prescriptions.json").read_text())

    @pytest.mark.parametrize("entry", corpus,
                             ids=[e["text"].splitlines()[0][:40] for e in corpus])
    def test_corpus_entry(self, entry):
        parsed = parse_prescription(entry["text"])
        got = [{
            "medicine_name": d.medicine_name, "dose": d.dose,
            "times": list(d.times), "frequency": d.frequency,
            "duration_days": d.duration_days,
        } for d in parsed.directives]
        assert got == entry["directives"]
        assert parsed.unparsed == entry["unparsed"]

    def test_empty_prescription_raises(self):
        for text in ("", "   ", "\n\n  \n"):
            with pytest.raises(EmptyPrescription):
                parse_prescription(text)

    def test_directive_validation(self):
        with pytest.raises(ValueError):
            MedicationDirective("X", "5mg", ("09:00",), 2, 3)
        with pytest.raises(ValueError):
            MedicationDirective("X", "5mg", ("09:00",), 1, 0)

    def test_default_times_table(self):
        assert DEFAULT_TIMES[1] == ("09:00",)
        assert DEFAULT_TIMES[2] == ("09:00", "21:00")
        assert DEFAULT_TIMES[3] == ("09:00", "14:00", "21:00")
        assert DEFAULT_TIMES[4] == ("08:00", "12:00", "16:00", "20:00")

    def test_high_frequency_gets_distinct_ordered_times(self):
        parsed = parse_prescription("Drug 5mg 6 times a day for 2 days")
        times = parsed.directives[0].times
        assert len(times) == 6
        assert list(times) == sorted(set(times))
        assert times[0] >= "08:00" and times[-1] <= "20:00"


class TestReminders:
    def two_directives(self):
        return parse_prescription(
            "Paracetamol 500mg twice a day for 5 days\n"
            "Azithromycin 500mg once daily for 3 days").directives

    def test_expansion_count_is_frequency_times_duration(self):
        reminders = directives_to_reminders(self.two_directives(),
                                            date(2025, 3, 1), "USER000001")
        assert len(reminders) == 2 * 5 + 1 * 3

    def test_expansion_schedule(self):
        reminders = directives_to_reminders(self.two_directives()[:1],
                                            date(2025, 3, 1), "USER000001")
        assert reminders[0].fire_at == datetime(2025, 3, 1, 9, 0)
        assert reminders[1].fire_at == datetime(2025, 3, 1, 21, 0)
        assert reminders[-1].fire_at == datetime(2025, 3, 5, 21, 0)
        assert all(r.user_id == "USER000001" for r in reminders)
        assert all(r.status == "pending" for r in reminders)
        assert all(r.medicine_name == "Paracetamol" for r in reminders)

    def test_corpus_totals(self):
        corpus = TestPrescriptionParsing.corpus
        for entry in corpus:
            directives = parse_prescription(entry["text"]).directives
            reminders = directives_to_reminders(directives, date(2025, 1, 1), "U")
            expected = sum(d["frequency"] * d["duration_days"]
                           for d in entry["directives"])
            assert len(reminders) == expected

    def test_due_reminders_fire_exactly_once(self):
        class FakeStore:
            def __init__(self, reminders):
                self.reminders = {i: r for i, r in enumerate(reminders)}
                for i, r in self.reminders.items():
                    r.reminder_id = i

            def list_reminders(self, status=None):
                return [r for r in self.reminders.values()
                        if status is None or r.status == status]

            def mark_reminder(self, reminder_id, status):
                self.reminders[reminder_id].status = status

        base = datetime(2025, 3, 1, 9, 0)
        store = FakeStore([
            Reminder("U", "A", base),
            Reminder("U", "B", base + timedelta(hours=3)),
            Reminder("U", "C", base + timedelta(days=1)),
        ])
        due = due_reminders(base + timedelta(hours=3), store)
        assert sorted(r.medicine_name for r in due) == ["A", "B"]
        assert all(r.status == "fired" for r in due)
        assert due_reminders(base + timedelta(hours=3), store) == []
        assert len(due_reminders(base + timedelta(days=2), store)) == 1


class TestDailyReport:
    def inputs(self):
        return ReportInputs(
            user_id="USER000001", date=date(2025, 3, 1),
            vitals=[sample(hr=70, oxygen=97), sample(hr=80, oxygen=99)],
            anomalies=["heart_rate low at 08:11"],
            sessions=["sess-1"],
            appointments=[{"specialist_id": "AECJ317777"}],
            reminder_counts={"pending": 2, "fired": 3, "dismissed": 0},
        )

    def test_summary_statistics(self):
        report = generate_report(self.inputs())
        hr = report.vitals_summary["heart_rate"]
        assert hr == {"min": 70, "max": 80, "mean": 75, "count": 2}
        assert report.vitals_summary["oxygen"]["mean"] == 98

    def test_empty_vitals_summary(self):
        report = generate_report(ReportInputs("U", date(2025, 3, 1)))
        assert report.vitals_summary["heart_rate"]["count"] == 0

    def test_text_rendering(self):
        text = render_report_text(generate_report(self.inputs()))
        assert "USER000001" in text and "2025-03-01" in text
        assert "heart_rate: min 70 max 80 mean 75" in text
        assert "anomalies: 1" in text
        assert "3 fired, 2 pending" in text

    def test_backend_adds_narrative(self):
        class Backend:
            def complete(self, prompt, role):
                assert role == "planner"
                return "  All vitals look stable today. "

        report = generate_report(self.inputs(), backend=Backend())
        assert report.narrative == "All vitals look stable today."

    def test_backend_failure_degrades_gracefully(self):
        class Broken:
            def complete(self, prompt, role):
                raise RuntimeError("model offline")

        report = generate_report(self.inputs(), backend=Broken())
        assert report.narrative is None

    def test_round_trip_dict(self):
        report = generate_report(self.inputs())
        data = report.to_dict()
        assert data["user_id"] == "USER000001"
        assert data["reminder_counts"] == {"pending": 2, "fired": 3, "dismissed": 0}
