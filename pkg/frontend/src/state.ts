// Pure derivations over gateway payloads. Everything the panels display is
// computed here from endpoint data; the client keeps no state of its own
// beyond the latest replies it has seen.

import type {
  CallerValue,
  ChatReply,
  PlannerValue,
  TrajectoryEvent,
} from "./types.js";

export interface SmsMessage {
  to: string | null;
  broadcast: boolean;
  text: string;
}

export interface ChatLine {
  role: "user" | "assistant";
  text: string;
}

function callerValue(event: TrajectoryEvent): CallerValue | null {
  if (event.from !== "caller") return null;
  const value = event.value as CallerValue;
  if (!value || typeof value.tool !== "string") return null;
  return value;
}

export function plannerSteps(events: TrajectoryEvent[]): PlannerValue[] {
  const steps: PlannerValue[] = [];
  for (const event of events) {
    if (event.from !== "planner") continue;
    const value = event.value as PlannerValue;
    if (value && typeof value.reason === "string") steps.push(value);
  }
  return steps;
}

// The gateway has no message endpoint; the SMS log is read off the session
// events, one entry per send_message call the agent made.
export function smsMessagesFromLog(events: TrajectoryEvent[]): SmsMessage[] {
  const messages: SmsMessage[] = [];
  for (const event of events) {
    const call = callerValue(event);
    if (!call || call.tool !== "send_message") continue;
    const params = call.parameters;
    messages.push({
      to: typeof params.phone_no === "string" ? params.phone_no : null,
      broadcast: Boolean(params.to_emergency_contacts),
      text: typeof params.text === "string" ? params.text : "",
    });
  }
  return messages;
}

export function notificationsFromLog(events: TrajectoryEvent[]): string[] {
  const notes: string[] = [];
  for (const event of events) {
    const call = callerValue(event);
    if (!call || call.tool !== "notify_user") continue;
    const params = call.parameters;
    const text = params.message ?? params.symptoms;
    if (typeof text === "string") notes.push(text);
  }
  return notes;
}

export function describeEvent(event: TrajectoryEvent): string {
  switch (event.from) {
    case "system":
      return "session opened";
    case "user":
      return String(event.value);
    case "planner": {
      const step = event.value as PlannerValue;
      return `${step.reason} -> ${step.action}`;
    }
    case "caller": {
      const call = event.value as CallerValue;
      return `${call.tool}(${JSON.stringify(call.parameters)})`;
    }
    case "observation": {
      const value = event.value as { result: unknown };
      return JSON.stringify(value.result);
    }
  }
}

// Polling re-fetches the whole log each tick; the log is append-only, so a
// later response must start with the earlier one.
export function isEventPrefix(earlier: TrajectoryEvent[], later: TrajectoryEvent[]): boolean {
  if (earlier.length > later.length) return false;
  for (let i = 0; i < earlier.length; i++) {
    if (JSON.stringify(earlier[i]) !== JSON.stringify(later[i])) return false;
  }
  return true;
}

// Assistant-facing lines to append to the transcript after a chat reply.
export function chatLinesFromReply(reply: ChatReply): ChatLine[] {
  if (reply.status === "awaiting_user" && reply.pending_question) {
    return [{ role: "assistant", text: reply.pending_question }];
  }
  if (reply.status === "completed") {
    const notes = notificationsFromLog(reply.events);
    const text = reply.notification ?? notes[notes.length - 1] ?? "Done.";
    return [{ role: "assistant", text }];
  }
  if (reply.status === "failed") {
    return [{ role: "assistant", text: `The session failed: ${reply.failure ?? "unknown error"}` }];
  }
  return [];
}

// Mirrors the gateway's sample bounds so obviously bad readings are caught
// before the request is sent. The gateway still validates on its side.
export function validateVitals(heartRate: number, oxygen: number): string[] {
  const problems: string[] = [];
  if (!Number.isFinite(heartRate) || heartRate <= 0) {
    problems.push("heart rate must be a positive number");
  }
  if (!Number.isFinite(oxygen) || oxygen <= 0 || oxygen > 100) {
    problems.push("oxygen saturation must be between 0 and 100");
  }
  return problems;
}
