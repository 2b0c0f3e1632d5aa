// Gateway payload shapes. Field names mirror the trajectory documents and
// the HTTP responses exactly; nothing here is invented client-side.

export type StateKind = "system" | "user" | "planner" | "caller" | "observation";

export interface PlannerValue {
  reason: string;
  action: string;
}

export interface CallerValue {
  tool: string;
  parameters: Record<string, unknown>;
}

export interface TrajectoryEvent {
  from: StateKind;
  value: unknown;
}

export type SessionStatus = "running" | "awaiting_user" | "completed" | "failed";

export interface SessionSnapshot {
  session_id: string;
  user_id: string;
  kind: string;
  status: SessionStatus;
  pending_question: string | null;
  failure: string | null;
  events: TrajectoryEvent[];
}

export interface ChatReply extends SessionSnapshot {
  notification?: string | null;
}

export interface MetricSummary {
  min: number;
  max: number;
  mean: number;
  count: number;
}

export interface VitalsReply {
  user_id: string;
  verdict: string[];
  triggered: boolean;
  summary: Record<string, MetricSummary>;
  session: SessionSnapshot | null;
  alert: string | null;
}

export interface Reminder {
  reminder_id: number;
  medicine_name: string;
  fire_at: string;
  status: "pending" | "fired" | "dismissed";
}

export interface RemindersReply {
  user_id: string;
  reminders: Reminder[];
  counts: { pending: number; fired: number; dismissed: number };
}

export interface ReportReply {
  user_id: string;
  date: string;
  vitals_summary: Record<string, MetricSummary>;
  anomalies: string[];
  sessions: string[];
  appointments: Record<string, unknown>[];
  reminder_counts: { pending: number; fired: number; dismissed: number };
  narrative: string;
  text: string;
}

export interface StatusReply {
  status: string;
  sms_mode: string;
  users: string[];
  sessions: number;
}

export interface PrescriptionReply {
  user_id: string;
  directives: {
    medicine_name: string;
    dose: string;
    times: string[];
    frequency: number;
    duration_days: number;
  }[];
  unparsed: string[];
  reminders_created: number;
}

export interface VitalsSampleInput {
  heart_rate: number;
  oxygen: number;
  sleep?: Record<string, number>;
  timestamp?: string;
}
