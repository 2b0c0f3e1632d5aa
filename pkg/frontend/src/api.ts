// Thin HTTP client for the health agent gateway. Every method maps to one
// endpoint and returns the parsed body; non-2xx responses become GatewayError.

import type {
  ChatReply,
  PrescriptionReply,
  RemindersReply,
  ReportReply,
  SessionSnapshot,
  StatusReply,
  TrajectoryEvent,
  VitalsReply,
  VitalsSampleInput,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "GatewayError";
    this.status = status;
  }
}

async function errorLabel(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") return body.error;
    // validation failures come back under "detail"
    if (body && body.detail !== undefined) return JSON.stringify(body.detail);
  } catch {
    // fall through to the generic label
  }
  return `HTTP ${response.status}`;
}

export class GatewayClient {
  private base: string;
  private fetchFn: FetchLike;

  constructor(base: string, fetchFn?: FetchLike) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      throw new GatewayError(response.status, await errorLabel(response));
    }
    return (await response.json()) as T;
  }

  status(): Promise<StatusReply> {
    return this.request("GET", "/status");
  }

  registerUser(userId: string, profile: Record<string, unknown> = {}): Promise<{ user_id: string }> {
    return this.request("POST", "/users", { user_id: userId, ...profile });
  }

  chat(userId: string, text: string, sessionId?: string): Promise<ChatReply> {
    const payload: Record<string, unknown> = { user_id: userId, text };
    if (sessionId !== undefined) payload.session_id = sessionId;
    return this.request("POST", "/chat", payload);
  }

  vitals(userId: string, sample: VitalsSampleInput): Promise<VitalsReply> {
    return this.request("POST", "/vitals", { user_id: userId, ...sample });
  }

  sos(userId: string, kind: "hard_start" | "hard_end"): Promise<SessionSnapshot> {
    return this.request("POST", "/sos", { user_id: userId, kind });
  }

  prescription(userId: string, text: string): Promise<PrescriptionReply> {
    return this.request("POST", "/prescription", { user_id: userId, text });
  }

  reminders(userId: string): Promise<RemindersReply> {
    return this.request("GET", `/reminders?user_id=${encodeURIComponent(userId)}`);
  }

  report(userId: string, date: string): Promise<ReportReply> {
    const query = `user_id=${encodeURIComponent(userId)}&date=${encodeURIComponent(date)}`;
    return this.request("GET", `/report?${query}`);
  }

  sessionLog(sessionId: string): Promise<{ session_id: string; status: string; events: TrajectoryEvent[] }> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/log`);
  }
}
