// HTML builders for the four panels. Each takes plain data and returns a
// markup string, so the views are testable without a browser.

import type {
  RemindersReply,
  ReportReply,
  StatusReply,
  TrajectoryEvent,
  VitalsReply,
} from "./types.js";
import { describeEvent, type ChatLine, type SmsMessage } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderChat(lines: ChatLine[], pending: boolean): string {
  const rows = lines
    .map(
      (line) =>
        `<div class="msg ${line.role}"><span class="who">${line.role}</span>` +
        `<span class="text">${escapeHtml(line.text)}</span></div>`,
    )
    .join("");
  const hint = pending
    ? '<div class="hint">The agent asked a question; your next message answers it.</div>'
    : "";
  return `<div class="transcript">${rows}</div>${hint}`;
}

export function renderAgentLog(events: TrajectoryEvent[]): string {
  if (events.length === 0) {
    return '<div class="empty">No session selected.</div>';
  }
  const rows = events
    .map(
      (event, i) =>
        `<div class="event ${event.from}"><span class="step">${i}</span>` +
        `<span class="kind">${event.from}</span>` +
        `<span class="text">${escapeHtml(describeEvent(event))}</span></div>`,
    )
    .join("");
  return `<div class="events">${rows}</div>`;
}

export function renderSmsLog(messages: SmsMessage[], smsMode: string): string {
  const heading = `<div class="sms-mode">outbox (${escapeHtml(smsMode)} mode)</div>`;
  if (messages.length === 0) {
    return `${heading}<div class="empty">No messages sent.</div>`;
  }
  const rows = messages
    .map((message) => {
      const target = message.broadcast
        ? "emergency contacts"
        : message.to ?? "unknown number";
      return (
        `<div class="sms"><span class="to">${escapeHtml(target)}</span>` +
        `<span class="text">${escapeHtml(message.text)}</span></div>`
      );
    })
    .join("");
  return `${heading}<div class="sms-list">${rows}</div>`;
}

export function renderVitals(reply: VitalsReply | null): string {
  if (!reply) return '<div class="empty">No readings yet.</div>';
  const metrics = Object.entries(reply.summary)
    .map(
      ([name, stat]) =>
        `<tr><td>${escapeHtml(name)}</td><td>${stat.min}</td><td>${stat.max}</td>` +
        `<td>${stat.mean.toFixed(1)}</td><td>${stat.count}</td></tr>`,
    )
    .join("");
  const verdict = reply.triggered
    ? `<div class="alert">${escapeHtml(reply.alert ?? "Abnormal vitals")}` +
      ` (${reply.verdict.map(escapeHtml).join(", ")})</div>`
    : '<div class="ok">All readings in range.</div>';
  return (
    `${verdict}<table class="vitals"><tr><th>metric</th><th>min</th>` +
    `<th>max</th><th>mean</th><th>n</th></tr>${metrics}</table>`
  );
}

export function renderReminders(reply: RemindersReply | null): string {
  if (!reply) return '<div class="empty">No reminders.</div>';
  const counts = reply.counts;
  const rows = reply.reminders
    .slice(0, 12)
    .map(
      (reminder) =>
        `<tr class="${reminder.status}"><td>${escapeHtml(reminder.medicine_name)}</td>` +
        `<td>${escapeHtml(reminder.fire_at.replace("T", " "))}</td>` +
        `<td>${reminder.status}</td></tr>`,
    )
    .join("");
  return (
    `<div class="counts">pending ${counts.pending} / fired ${counts.fired}` +
    ` / dismissed ${counts.dismissed}</div>` +
    `<table class="reminders"><tr><th>medicine</th><th>when</th><th>status</th></tr>${rows}</table>`
  );
}

export function renderReport(reply: ReportReply | null): string {
  if (!reply) return '<div class="empty">Pick a date to build a report.</div>';
  const anomalies = reply.anomalies.length
    ? `<div class="alert">anomalies: ${reply.anomalies.map(escapeHtml).join(", ")}</div>`
    : "";
  return (
    `<div class="report-date">${escapeHtml(reply.date)}</div>${anomalies}` +
    `<pre class="narrative">${escapeHtml(reply.text)}</pre>`
  );
}

export function renderStatusBar(status: StatusReply | null, error: string | null): string {
  if (error) {
    return `<div class="banner error">gateway unreachable: ${escapeHtml(error)}</div>`;
  }
  if (!status) return '<div class="banner">connecting...</div>';
  return (
    `<div class="banner ok">gateway ${escapeHtml(status.status)}` +
    ` | sms ${escapeHtml(status.sms_mode)} | ${status.users.length} users` +
    ` | ${status.sessions} sessions</div>`
  );
}
