// Strip charts for the cost and telemetry histories. Pure draw functions:
// everything comes from the passed buffers.

import type { Ctx2D } from "./render.js";
import type { CostFrame, TelemetryUpdate } from "./protocol.js";

export interface Series {
  label: string;
  values: number[];
  color: string;
}

export function costSeries(frames: readonly CostFrame[],
                           terms: string[]): Series[] {
  const palette = ["#08c", "#d22", "#2a7", "#a5a", "#fa0", "#0aa", "#888",
                   "#c66", "#66c"];
  const out: Series[] = [{
    label: "total",
    values: frames.map((f) => f.total),
    color: "#000",
  }];
  terms.forEach((term, i) => {
    out.push({
      label: term,
      values: frames.map((f) => f.terms[term] ?? 0),
      color: palette[i % palette.length],
    });
  });
  return out;
}

export function telemetrySeries(records: readonly TelemetryUpdate[]
                                ): Series[] {
  return [
    { label: "fd_evals", color: "#08c",
      values: records.map((r) => r.fd_evals) },
    { label: "alpha", color: "#2a7", values: records.map((r) => r.alpha) },
  ];
}

export function drawSeries(ctx: Ctx2D, width: number, height: number,
                           series: Series[], logScale = false): void {
  ctx.clearRect(0, 0, width, height);
  let hi = -Infinity;
  let lo = Infinity;
  for (const s of series) {
    for (const v of s.values) {
      const y = logScale ? Math.log10(Math.max(v, 1e-12)) : v;
      if (y > hi) hi = y;
      if (y < lo) lo = y;
    }
  }
  if (!isFinite(hi) || !isFinite(lo)) return;
  if (hi === lo) hi = lo + 1;
  for (const s of series) {
    if (s.values.length < 2) continue;
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1;
    ctx.beginPath();
    s.values.forEach((v, i) => {
      const y = logScale ? Math.log10(Math.max(v, 1e-12)) : v;
      const px = (i / (s.values.length - 1)) * (width - 4) + 2;
      const py = height - 2 - ((y - lo) / (hi - lo)) * (height - 4);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }
}
