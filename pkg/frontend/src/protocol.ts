// Wire protocol shared with the session server: flat JSON objects with a
// `type` field over a websocket. Commands carry a client-chosen id echoed in
// the matching ack/nack. Schema version is pinned in the hello handshake.

export const SCHEMA_VERSION = 1;

export interface StateFrame {
  type: "state_frame";
  t: number;
  x: number[];
  x_est: number[];
  segments: [number, number][][];
  contact_points: [number, number][];
  contact_forces: [number, number][];
  paused: boolean;
  goal: [number, number] | null;
  plan_trace: [number, number][];
  sol: number;
}

export interface CostFrame {
  type: "cost_frame";
  t: number;
  total: number;
  terms: Record<string, number>;
}

export interface TelemetryUpdate {
  type: "telemetry";
  t: number;
  sol: number;
  alpha: number;
  reg: number;
  cost: number;
  baseline_cost: number;
  fd_evals: number;
  degraded: boolean;
  costspec_version: number;
  phase_times: Record<string, number | null> | null;
}

export interface Hello {
  type: "hello";
  version: number;
  role: "operator" | "readonly";
  tasks: string[];
}

export interface TaskCatalog {
  type: "task_catalog";
  tasks: string[];
  params: Record<string, number>;
  weights: Record<string, number>;
  costspec_version: number;
}

export interface Ack {
  type: "ack";
  id: number;
  applied?: Record<string, unknown>;
}

export interface Nack {
  type: "nack";
  id: number;
  reason: string;
}

export type Update =
  | StateFrame | CostFrame | TelemetryUpdate | Hello | TaskCatalog | Ack | Nack;

export type Command =
  | { type: "set_target"; id: number; x: number; z: number }
  | { type: "set_weight"; id: number; term: string; value: number }
  | { type: "set_param"; id: number; path: string; value: number }
  | { type: "push"; id: number; impulse: [number, number]; body?: number }
  | { type: "pause"; id: number }
  | { type: "resume"; id: number }
  | { type: "reset"; id: number }
  | { type: "start_task"; id: number; task: string };

export function encode(msg: Command): string {
  return JSON.stringify(msg);
}

export function decodeUpdate(text: string): Update {
  const msg = JSON.parse(text) as { type?: string };
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new Error("malformed update: missing type");
  }
  if (msg.type === "hello" && (msg as Hello).version > SCHEMA_VERSION) {
    throw new Error("server speaks a newer protocol schema");
  }
  return msg as Update;
}
