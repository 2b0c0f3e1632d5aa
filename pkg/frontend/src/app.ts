// DOM wiring for the console. Four panels: chat, agent log, health, and the
// simulators (watch readings and the SOS button). All facts on screen come
// from the gateway; the only client-side state is the latest replies and the
// visible transcript, none of it persisted.
//
// The gateway speaks plain request/response, so the agent log is polled once
// a second. That approximates streaming: steps appear in batches when a
// session finishes rather than one by one while it runs.

import { GatewayClient, GatewayError } from "./api.js";
import {
  chatLinesFromReply,
  isEventPrefix,
  smsMessagesFromLog,
  validateVitals,
  type ChatLine,
} from "./state.js";
import {
  renderAgentLog,
  renderChat,
  renderReminders,
  renderReport,
  renderSmsLog,
  renderStatusBar,
  renderVitals,
} from "./render.js";
import type {
  RemindersReply,
  ReportReply,
  StatusReply,
  TrajectoryEvent,
  VitalsReply,
} from "./types.js";

const POLL_MS = 1000;

const client = new GatewayClient(
  new URLSearchParams(location.search).get("gateway") ?? "http://127.0.0.1:8000",
);

const state = {
  status: null as StatusReply | null,
  error: null as string | null,
  userId: "",
  sessionId: null as string | null,
  pendingSessionId: null as string | null,
  transcript: [] as ChatLine[],
  events: [] as TrajectoryEvent[],
  vitals: null as VitalsReply | null,
  reminders: null as RemindersReply | null,
  report: null as ReportReply | null,
};

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function draw(): void {
  el("status-bar").innerHTML = renderStatusBar(state.status, state.error);
  el("chat-view").innerHTML = renderChat(state.transcript, state.pendingSessionId !== null);
  el("log-view").innerHTML = renderAgentLog(state.events);
  el("sms-view").innerHTML = renderSmsLog(
    smsMessagesFromLog(state.events),
    state.status?.sms_mode ?? "?",
  );
  el("vitals-view").innerHTML = renderVitals(state.vitals);
  el("reminders-view").innerHTML = renderReminders(state.reminders);
  el("report-view").innerHTML = renderReport(state.report);
  const transcript = el("chat-view").querySelector(".transcript");
  if (transcript) transcript.scrollTop = transcript.scrollHeight;
}

function showError(err: unknown): void {
  state.error = err instanceof Error ? err.message : String(err);
  draw();
}

function syncUserOptions(): void {
  const select = el<HTMLSelectElement>("user-select");
  const users = state.status?.users ?? [];
  const known = new Set(Array.from(select.options).map((o) => o.value));
  for (const uid of users) {
    if (known.has(uid)) continue;
    const option = document.createElement("option");
    option.value = uid;
    option.textContent = uid;
    select.appendChild(option);
  }
  if (!state.userId && users.length > 0) {
    state.userId = users[0];
    select.value = state.userId;
  }
}

async function poll(): Promise<void> {
  try {
    state.status = await client.status();
    syncUserOptions();
    if (state.sessionId) {
      const log = await client.sessionLog(state.sessionId);
      // the log is append-only; a shrinking or rewritten log means the
      // session id now points somewhere else, so just take the new view
      if (!isEventPrefix(state.events, log.events)) state.events = [];
      state.events = log.events;
    }
    if (state.userId) {
      state.reminders = await client.reminders(state.userId);
    }
    state.error = null;
  } catch (err) {
    state.error = err instanceof Error ? err.message : String(err);
  }
  draw();
}

async function sendChat(): Promise<void> {
  const input = el<HTMLInputElement>("chat-input");
  const text = input.value.trim();
  if (!text || !state.userId) return;
  input.value = "";
  state.transcript.push({ role: "user", text });
  draw();
  try {
    const reply = await client.chat(state.userId, text, state.pendingSessionId ?? undefined);
    state.sessionId = reply.session_id;
    state.pendingSessionId = reply.status === "awaiting_user" ? reply.session_id : null;
    state.events = reply.events;
    state.transcript.push(...chatLinesFromReply(reply));
    state.error = null;
    draw();
  } catch (err) {
    if (err instanceof GatewayError) {
      state.transcript.push({ role: "assistant", text: `error: ${err.message}` });
      state.pendingSessionId = null;
      draw();
    } else {
      showError(err);
    }
  }
}

async function sendReading(): Promise<void> {
  const heartRate = Number(el<HTMLInputElement>("hr-input").value);
  const oxygen = Number(el<HTMLInputElement>("ox-input").value);
  const problems = validateVitals(heartRate, oxygen);
  if (problems.length > 0) {
    showError(problems.join("; "));
    return;
  }
  try {
    const reply = await client.vitals(state.userId, { heart_rate: heartRate, oxygen });
    state.vitals = reply;
    if (reply.session) {
      state.sessionId = reply.session.session_id;
      state.events = reply.session.events;
    }
    if (reply.alert) {
      state.transcript.push({ role: "assistant", text: reply.alert });
    }
    state.error = null;
    draw();
  } catch (err) {
    showError(err);
  }
}

async function sendSos(kind: "hard_start" | "hard_end"): Promise<void> {
  try {
    const snapshot = await client.sos(state.userId, kind);
    state.sessionId = snapshot.session_id;
    state.events = snapshot.events;
    state.error = null;
    draw();
  } catch (err) {
    showError(err);
  }
}

async function sendPrescription(): Promise<void> {
  const input = el<HTMLTextAreaElement>("rx-input");
  const text = input.value.trim();
  if (!text) return;
  try {
    const reply = await client.prescription(state.userId, text);
    input.value = "";
    state.reminders = await client.reminders(state.userId);
    state.transcript.push({
      role: "assistant",
      text: `Scheduled ${reply.reminders_created} reminders for ${reply.directives.length} medicines.`,
    });
    state.error = null;
    draw();
  } catch (err) {
    showError(err);
  }
}

async function fetchReport(): Promise<void> {
  const date = el<HTMLInputElement>("report-date").value;
  if (!date) return;
  try {
    state.report = await client.report(state.userId, date);
    state.error = null;
    draw();
  } catch (err) {
    showError(err);
  }
}

function init(): void {
  el("chat-send").addEventListener("click", () => void sendChat());
  el<HTMLInputElement>("chat-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void sendChat();
  });
  el("watch-send").addEventListener("click", () => void sendReading());
  el("sos-start").addEventListener("click", () => void sendSos("hard_start"));
  el("sos-end").addEventListener("click", () => void sendSos("hard_end"));
  el("rx-send").addEventListener("click", () => void sendPrescription());
  el("report-fetch").addEventListener("click", () => void fetchReport());
  el<HTMLSelectElement>("user-select").addEventListener("change", (event) => {
    state.userId = (event.target as HTMLSelectElement).value;
    state.reminders = null;
    state.report = null;
  });
  void poll();
  setInterval(() => void poll(), POLL_MS);
}

document.addEventListener("DOMContentLoaded", init);
