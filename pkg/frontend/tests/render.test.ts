import { describe, expect, it } from "vitest";

import type { StateFrame } from "../src/protocol.js";
import {
  canvasToWorld, nearGoal, renderFrame, worldToCanvas, type Ctx2D,
  type Viewport,
} from "../src/render.js";

// Recording 2D context: render purity is pinned on the command stream.
class RecordingCtx implements Ctx2D {
  ops: string[] = [];
  strokeStyle: string = "#000";
  fillStyle: string = "#000";
  lineWidth = 1;

  clearRect(...args: number[]) { this.ops.push(`clearRect ${args}`); }
  beginPath() { this.ops.push("beginPath"); }
  moveTo(x: number, y: number) { this.ops.push(`moveTo ${x.toFixed(2)},${y.toFixed(2)}`); }
  lineTo(x: number, y: number) { this.ops.push(`lineTo ${x.toFixed(2)},${y.toFixed(2)}`); }
  stroke() { this.ops.push(`stroke ${this.strokeStyle}`); }
  arc(...args: number[]) { this.ops.push(`arc ${args.map((a) => a.toFixed(2))}`); }
  fill() { this.ops.push(`fill ${this.fillStyle}`); }
  fillRect(...args: number[]) { this.ops.push(`fillRect ${args}`); }
  save() { this.ops.push("save"); }
  restore() { this.ops.push("restore"); }
}

const view: Viewport = { width: 800, height: 480, scale: 250, centerX: 0,
                         groundY: 420 };

function bipedFrame(): StateFrame {
  // five links, two contacts (one loaded, one unloaded), goal, 36-knot trace
  const segs: [number, number][][] = [];
  for (let i = 0; i < 5; i++) {
    segs.push([[0.1 * i, 0.5], [0.1 * i + 0.1, 0.3]]);
  }
  const trace: [number, number][] = [];
  for (let i = 0; i <= 35; i++) trace.push([0.01 * i, 0.58]);
  return {
    type: "state_frame", t: 2.0,
    x: [], x_est: [],
    segments: segs,
    contact_points: [[-0.08, 0.0], [0.08, 0.0]],
    contact_forces: [[1.0, 42.0], [0.0, 0.0]],
    paused: false,
    goal: [0.5, 0.93],
    plan_trace: trace,
    sol: 5,
  };
}

describe("renderFrame", () => {
  it("draws one segment stroke per link plus ground, trace, arrows, goal", () => {
    const ctx = new RecordingCtx();
    renderFrame(ctx, bipedFrame(), view);
    const strokes = ctx.ops.filter((o) => o.startsWith("stroke"));
    // ground + plan trace + 5 links + 1 nonzero force arrow
    expect(strokes.length).toBe(1 + 1 + 5 + 1);
    expect(ctx.ops.filter((o) => o.startsWith("fill ")).length).toBe(1); // goal
  });

  it("draws no force arrows when the contact force is zero", () => {
    const frame = bipedFrame();
    frame.contact_forces = [[0, 0], [0, 0]];
    const ctx = new RecordingCtx();
    renderFrame(ctx, frame, view);
    const strokes = ctx.ops.filter((o) => o.startsWith("stroke"));
    expect(strokes.length).toBe(1 + 1 + 5); // no arrows
  });

  it("plan trace polyline has one vertex per knot state", () => {
    const ctx = new RecordingCtx();
    renderFrame(ctx, bipedFrame(), view);
    // trace: 1 moveTo + 35 lineTo between its beginPath and its stroke
    const end = ctx.ops.findIndex((o) => o === "stroke #2a7");
    expect(end).toBeGreaterThan(0);
    const begin = ctx.ops.lastIndexOf("beginPath", end);
    const body = ctx.ops.slice(begin, end);
    expect(body.filter((o) => o.startsWith("moveTo")).length).toBe(1);
    expect(body.filter((o) => o.startsWith("lineTo")).length).toBe(35);
  });

  it("is a pure function of the frame and viewport", () => {
    const a = new RecordingCtx();
    const b = new RecordingCtx();
    renderFrame(a, bipedFrame(), view);
    renderFrame(b, bipedFrame(), view);
    expect(a.ops).toEqual(b.ops);
  });

  it("renders a placeholder when no frame has arrived", () => {
    const ctx = new RecordingCtx();
    renderFrame(ctx, null, view);
    expect(ctx.ops[0]).toMatch(/clearRect/);
    expect(ctx.ops.some((o) => o.startsWith("stroke"))).toBe(true);
  });
});

describe("coordinate transforms", () => {
  it("round-trips world coordinates through the canvas", () => {
    const [px, py] = worldToCanvas(view, 0.7, 0.4);
    const [x, z] = canvasToWorld(view, px, py);
    expect(x).toBeCloseTo(0.7, 12);
    expect(z).toBeCloseTo(0.4, 12);
  });

  it("hit-tests the goal marker", () => {
    const frame = bipedFrame();
    const [gx, gy] = worldToCanvas(view, 0.5, 0.93);
    expect(nearGoal(view, frame, gx + 3, gy - 3)).toBe(true);
    expect(nearGoal(view, frame, gx + 40, gy)).toBe(false);
    expect(nearGoal(view, null, gx, gy)).toBe(false);
  });
});
