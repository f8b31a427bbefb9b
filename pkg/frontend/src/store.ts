// Client-side session state. The parameter mirror holds the server's last
// acknowledged values only: commands in flight live in `pending` and never
// touch the mirror until their ack arrives (no optimistic updates).

import type {
  Ack, Command, CostFrame, Nack, StateFrame, TaskCatalog, TelemetryUpdate,
  Update,
} from "./protocol.js";

export class RingBuffer<T> {
  private items: T[] = [];

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("capacity must be >= 1");
  }

  push(item: T): void {
    this.items.push(item);
    if (this.items.length > this.capacity) {
      this.items.splice(0, this.items.length - this.capacity);
    }
  }

  get length(): number {
    return this.items.length;
  }

  last(): T | undefined {
    return this.items[this.items.length - 1];
  }

  toArray(): readonly T[] {
    return this.items;
  }
}

export interface PendingCommand {
  command: Command;
  sentAt: number;
}

export type UiEvent =
  | { kind: "ack"; command: Command; applied?: Record<string, unknown> }
  | { kind: "nack"; command: Command | null; reason: string }
  | { kind: "catalog" }
  | { kind: "frame" };

export type ConnectionStatus = "connecting" | "connected" | "closed";

export class SessionStore {
  connection: ConnectionStatus = "connecting";
  role: "operator" | "readonly" | null = null;
  tasks: string[] = [];
  latestFrame: StateFrame | null = null;
  readonly costHistory: RingBuffer<CostFrame>;
  readonly telemetryHistory: RingBuffer<TelemetryUpdate>;
  // last acknowledged values; the single source of truth for the widgets
  weights: Record<string, number> = {};
  params: Record<string, number> = {};
  costspecVersion = 0;
  readonly pending = new Map<number, PendingCommand>();

  constructor(capacity = 600) {
    this.costHistory = new RingBuffer<CostFrame>(capacity);
    this.telemetryHistory = new RingBuffer<TelemetryUpdate>(capacity);
  }

  track(command: Command, now = 0): void {
    this.pending.set(command.id, { command, sentAt: now });
  }

  // Fold one server update in; returns events the UI layer reacts to.
  handle(msg: Update): UiEvent[] {
    switch (msg.type) {
      case "hello":
        this.connection = "connected";
        this.role = msg.role;
        this.tasks = msg.tasks;
        return [];
      case "task_catalog": {
        const cat = msg as TaskCatalog;
        this.weights = { ...cat.weights };
        this.params = { ...cat.params };
        this.costspecVersion = cat.costspec_version;
        return [{ kind: "catalog" }];
      }
      case "state_frame":
        this.latestFrame = msg as StateFrame;
        return [{ kind: "frame" }];
      case "cost_frame":
        this.costHistory.push(msg as CostFrame);
        return [];
      case "telemetry":
        this.telemetryHistory.push(msg as TelemetryUpdate);
        return [];
      case "ack": {
        const ack = msg as Ack;
        const entry = this.pending.get(ack.id);
        this.pending.delete(ack.id);
        if (entry) {
          this.applyAcked(entry.command, ack);
          return [{ kind: "ack", command: entry.command, applied: ack.applied }];
        }
        return [];
      }
      case "nack": {
        const nack = msg as Nack;
        const entry = this.pending.get(nack.id);
        this.pending.delete(nack.id);
        return [{ kind: "nack", command: entry?.command ?? null,
                  reason: nack.reason }];
      }
    }
  }

  private applyAcked(cmd: Command, ack: Ack): void {
    if (cmd.type === "set_weight") {
      this.weights[cmd.term] = cmd.value;
    } else if (cmd.type === "set_param") {
      this.params[cmd.path] = cmd.value;
    }
    const version = ack.applied?.["costspec_version"];
    if (typeof version === "number") {
      this.costspecVersion = version;
    }
  }
}
