// Panel markup is built from strings, so these run without a DOM.

import { describe, expect, it } from "vitest";
import {
  escapeHtml,
  renderAgentLog,
  renderChat,
  renderReminders,
  renderReport,
  renderSmsLog,
  renderStatusBar,
  renderVitals,
} from "../src/render.js";
import type { RemindersReply, ReportReply, VitalsReply } from "../src/types.js";

describe("escapeHtml", () => {
  it("neutralises markup in agent text", () => {
    expect(escapeHtml('<b>"hi" & bye</b>')).toBe("&lt;b&gt;&quot;hi&quot; &amp; bye&lt;/b&gt;");
  });
});

describe("renderChat", () => {
  it("shows both roles and the suspension hint", () => {
    const html = renderChat(
      [
        { role: "user", text: "I feel dizzy" },
        { role: "assistant", text: "Would you like to schedule an appointment?" },
      ],
      true,
    );
    expect(html).toContain("I feel dizzy");
    expect(html).toContain("schedule an appointment?");
    expect(html).toContain("your next message answers it");
  });

  it("omits the hint when nothing is pending", () => {
    expect(renderChat([], false)).not.toContain("hint");
  });
});

describe("renderAgentLog", () => {
  it("numbers the steps and escapes payloads", () => {
    const html = renderAgentLog([
      { from: "user", value: "<script>alert(1)</script>" },
      { from: "planner", value: { reason: "r", action: "a" } },
    ]);
    expect(html).toContain('<span class="step">0</span>');
    expect(html).toContain('<span class="step">1</span>');
    expect(html).toContain("&lt;script&gt;");
    expect(html).not.toContain("<script>");
  });

  it("explains an empty log", () => {
    expect(renderAgentLog([])).toContain("No session selected");
  });
});

describe("renderSmsLog", () => {
  it("labels the mode and both delivery targets", () => {
    const html = renderSmsLog(
      [
        { to: "+1555", broadcast: false, text: "Ambulance needed" },
        { to: null, broadcast: true, text: "SOS triggered" },
      ],
      "mock",
    );
    expect(html).toContain("mock mode");
    expect(html).toContain("+1555");
    expect(html).toContain("emergency contacts");
    expect(html).toContain("Ambulance needed");
    expect(html).toContain("SOS triggered");
  });
});

const VITALS: VitalsReply = {
  user_id: "AAAA111111",
  verdict: ["heart_rate", "oxygen"],
  triggered: true,
  summary: { heart_rate: { min: 41, max: 41, mean: 41, count: 1 } },
  session: null,
  alert: "Soft SOS triggered: abnormal heart_rate, oxygen",
};

describe("renderVitals", () => {
  it("surfaces the alert and the rolling summary", () => {
    const html = renderVitals(VITALS);
    expect(html).toContain("Soft SOS triggered");
    expect(html).toContain("heart_rate");
    expect(html).toContain("<td>41</td>");
  });

  it("shows the all-clear otherwise", () => {
    const html = renderVitals({ ...VITALS, triggered: false, verdict: [], alert: null });
    expect(html).toContain("All readings in range");
  });
});

const REMINDERS: RemindersReply = {
  user_id: "AAAA111111",
  reminders: [
    { reminder_id: 1, medicine_name: "Paracetamol", fire_at: "2025-03-01T09:30:00", status: "pending" },
  ],
  counts: { pending: 1, fired: 0, dismissed: 0 },
};

describe("renderReminders", () => {
  it("lists medicines with their counts", () => {
    const html = renderReminders(REMINDERS);
    expect(html).toContain("Paracetamol");
    expect(html).toContain("pending 1 / fired 0 / dismissed 0");
    expect(html).toContain("2025-03-01 09:30:00");
  });
});

const REPORT: ReportReply = {
  user_id: "AAAA111111",
  date: "2025-03-01",
  vitals_summary: {},
  anomalies: ["oxygen"],
  sessions: [],
  appointments: [],
  reminder_counts: { pending: 0, fired: 0, dismissed: 0 },
  narrative: "One abnormal reading.",
  text: "Daily report for 2025-03-01\nOne abnormal reading.",
};

describe("renderReport", () => {
  it("prints the narrative and flags anomalies", () => {
    const html = renderReport(REPORT);
    expect(html).toContain("Daily report for 2025-03-01");
    expect(html).toContain("anomalies: oxygen");
  });
});

describe("renderStatusBar", () => {
  it("prefers the error over the status", () => {
    const html = renderStatusBar(
      { status: "ok", sms_mode: "mock", users: ["A"], sessions: 2 },
      "fetch failed",
    );
    expect(html).toContain("gateway unreachable");
    expect(html).toContain("fetch failed");
  });

  it("summarises a healthy gateway", () => {
    const html = renderStatusBar(
      { status: "ok", sms_mode: "mock", users: ["A", "B"], sessions: 2 },
      null,
    );
    expect(html).toContain("gateway ok");
    expect(html).toContain("sms mock");
    expect(html).toContain("2 users");
  });
});
