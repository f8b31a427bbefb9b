// Scene rendering. renderFrame is a pure function of its arguments: given
// the same frame and viewport it issues the same drawing commands, which the
// tests pin with a recording context.

import type { StateFrame } from "./protocol.js";

export interface Viewport {
  width: number;
  height: number;
  scale: number;    // pixels per meter
  centerX: number;  // world x at the canvas center
  groundY: number;  // canvas y of world z = 0, in pixels from the top
}

export const FORCE_SCALE = 0.004; // meters of arrow per newton

export type Ctx2D = Pick<
  CanvasRenderingContext2D,
  "clearRect" | "beginPath" | "moveTo" | "lineTo" | "stroke" | "arc" |
  "fill" | "fillRect" | "save" | "restore"
> & { strokeStyle: string | CanvasGradient | CanvasPattern;
      fillStyle: string | CanvasGradient | CanvasPattern;
      lineWidth: number };

export function worldToCanvas(view: Viewport, x: number, z: number
                              ): [number, number] {
  return [
    view.width / 2 + (x - view.centerX) * view.scale,
    view.groundY - z * view.scale,
  ];
}

export function canvasToWorld(view: Viewport, px: number, py: number
                              ): [number, number] {
  return [
    view.centerX + (px - view.width / 2) / view.scale,
    (view.groundY - py) / view.scale,
  ];
}

function line(ctx: Ctx2D, view: Viewport, a: [number, number],
              b: [number, number]): void {
  const [x0, y0] = worldToCanvas(view, a[0], a[1]);
  const [x1, y1] = worldToCanvas(view, b[0], b[1]);
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
}

export function renderFrame(ctx: Ctx2D, frame: StateFrame | null,
                            view: Viewport): void {
  ctx.clearRect(0, 0, view.width, view.height);
  if (frame === null) {
    // "connecting" placeholder: a dashed-feel box via two strokes
    ctx.strokeStyle = "#666";
    ctx.lineWidth = 1;
    line(ctx, view, [-0.5, 0.5], [0.5, 0.5]);
    return;
  }

  // ground
  ctx.strokeStyle = "#444";
  ctx.lineWidth = 2;
  line(ctx, view, [view.centerX - view.width / view.scale, 0],
       [view.centerX + view.width / view.scale, 0]);

  // planned-horizon torso trace
  if (frame.plan_trace.length > 1) {
    ctx.strokeStyle = "#2a7";
    ctx.lineWidth = 1;
    const [sx, sy] = worldToCanvas(view, frame.plan_trace[0][0],
                                   frame.plan_trace[0][1]);
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    for (let i = 1; i < frame.plan_trace.length; i++) {
      const [px, py] = worldToCanvas(view, frame.plan_trace[i][0],
                                     frame.plan_trace[i][1]);
      ctx.lineTo(px, py);
    }
    ctx.stroke();
  }

  // links
  ctx.strokeStyle = "#08c";
  ctx.lineWidth = 4;
  for (const seg of frame.segments) {
    line(ctx, view, seg[0] as [number, number], seg[1] as [number, number]);
  }

  // contact force arrows (skip zero forces)
  ctx.strokeStyle = "#d22";
  ctx.lineWidth = 2;
  frame.contact_forces.forEach((f, i) => {
    const mag = Math.hypot(f[0], f[1]);
    if (mag <= 1e-9 || i >= frame.contact_points.length) return;
    const p = frame.contact_points[i];
    line(ctx, view, p, [p[0] + f[0] * FORCE_SCALE, p[1] + f[1] * FORCE_SCALE]);
  });

  // goal marker
  if (frame.goal) {
    const [gx, gy] = worldToCanvas(view, frame.goal[0], frame.goal[1]);
    ctx.fillStyle = "#3c3";
    ctx.beginPath();
    ctx.arc(gx, gy, 7, 0, 2 * Math.PI);
    ctx.fill();
  }
}

// Hit test for starting a goal drag.
export function nearGoal(view: Viewport, frame: StateFrame | null,
                         px: number, py: number, radius = 12): boolean {
  if (!frame || !frame.goal) return false;
  const [gx, gy] = worldToCanvas(view, frame.goal[0], frame.goal[1]);
  return Math.hypot(px - gx, py - gy) <= radius;
}
