import { describe, expect, it } from "vitest";

import type { CostFrame, StateFrame, TaskCatalog } from "../src/protocol.js";
import { RingBuffer, SessionStore } from "../src/store.js";

function costFrame(t: number, terms: Record<string, number>): CostFrame {
  const total = Object.values(terms).reduce((a, b) => a + b, 0);
  return { type: "cost_frame", t, total, terms };
}

const catalog: TaskCatalog = {
  type: "task_catalog",
  tasks: ["biped_walk"],
  params: { skip_deriv: 0, horizon_T: 35 },
  weights: { upright: 30, gait: 800 },
  costspec_version: 0,
};

describe("RingBuffer", () => {
  it("never exceeds its capacity", () => {
    const buf = new RingBuffer<number>(50);
    for (let i = 0; i < 5000; i++) buf.push(i);
    expect(buf.length).toBe(50);
    expect(buf.toArray()[0]).toBe(4950);
    expect(buf.last()).toBe(4999);
  });
});

describe("SessionStore", () => {
  it("keeps plot history bounded regardless of session length", () => {
    const store = new SessionStore(100);
    for (let i = 0; i < 10_000; i++) {
      store.handle(costFrame(i * 0.03, { upright: 1 }));
    }
    expect(store.costHistory.length).toBe(100);
  });

  it("updates the parameter mirror only on ack", () => {
    const store = new SessionStore();
    store.handle(catalog);
    expect(store.weights.gait).toBe(800);

    store.track({ type: "set_weight", id: 7, term: "gait", value: 0 });
    expect(store.weights.gait).toBe(800); // still pending, no optimism

    const events = store.handle(
      { type: "ack", id: 7, applied: { costspec_version: 1 } });
    expect(store.weights.gait).toBe(0);
    expect(store.costspecVersion).toBe(1);
    expect(events[0]).toMatchObject({ kind: "ack" });
    expect(store.pending.size).toBe(0);
  });

  it("leaves the mirror untouched on nack", () => {
    const store = new SessionStore();
    store.handle(catalog);
    store.track({ type: "set_weight", id: 9, term: "gait", value: 123 });
    const events = store.handle(
      { type: "nack", id: 9, reason: "read-only" });
    expect(store.weights.gait).toBe(800);
    expect(events[0]).toMatchObject({ kind: "nack", reason: "read-only" });
  });

  it("stores the latest frame and reports hello metadata", () => {
    const store = new SessionStore();
    store.handle({ type: "hello", version: 1, role: "operator",
                   tasks: ["biped_walk"] });
    expect(store.connection).toBe("connected");
    expect(store.role).toBe("operator");
    const frame = {
      type: "state_frame", t: 1.0, x: [0, 0.58], x_est: [0, 0.58],
      segments: [], contact_points: [], contact_forces: [],
      paused: false, goal: [0.5, 0.93], plan_trace: [], sol: 3,
    } as unknown as StateFrame;
    store.handle(frame);
    expect(store.latestFrame?.sol).toBe(3);
  });
});
