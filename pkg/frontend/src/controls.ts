// Interactive edits: weight sliders (log scale), solver knobs, push/pause
// buttons, and goal dragging on the canvas. No optimistic updates: widgets
// re-read the store mirror after every ack/nack, so a nacked slider snaps
// back to the server's value.

import type { SessionClient } from "./client.js";
import type { SessionStore } from "./store.js";
import { canvasToWorld, nearGoal, type Viewport } from "./render.js";

const WEIGHT_SLIDER_STEPS = 200;
const WEIGHT_LOG_MIN = -4;  // 1e-4
const WEIGHT_LOG_MAX = 4;   // 1e+4

export function weightToSlider(value: number): number {
  if (value <= 0) return 0;
  const t = (Math.log10(value) - WEIGHT_LOG_MIN)
    / (WEIGHT_LOG_MAX - WEIGHT_LOG_MIN);
  return Math.round(Math.min(Math.max(t, 0), 1) * (WEIGHT_SLIDER_STEPS - 1)) + 1;
}

export function sliderToWeight(pos: number): number {
  if (pos <= 0) return 0;
  const t = (pos - 1) / (WEIGHT_SLIDER_STEPS - 1);
  return 10 ** (WEIGHT_LOG_MIN + t * (WEIGHT_LOG_MAX - WEIGHT_LOG_MIN));
}

export interface Toast {
  show(text: string): void;
}

export class WeightPanel {
  private sliders = new Map<string, HTMLInputElement>();

  constructor(
    private readonly root: HTMLElement,
    private readonly store: SessionStore,
    private readonly client: SessionClient,
    private readonly toast: Toast,
  ) {}

  rebuild(): void {
    this.root.textContent = "";
    this.sliders.clear();
    for (const [term, value] of Object.entries(this.store.weights)) {
      const row = document.createElement("label");
      row.className = "slider-row";
      const name = document.createElement("span");
      name.textContent = term;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = String(WEIGHT_SLIDER_STEPS);
      slider.step = "1";
      slider.value = String(weightToSlider(value));
      slider.dataset.term = term;
      // commit on release only; no mirror change until the ack lands
      slider.addEventListener("change", () => {
        this.client.setWeight(term, sliderToWeight(Number(slider.value)));
      });
      const readout = document.createElement("span");
      readout.className = "readout";
      readout.textContent = value.toPrecision(3);
      row.append(name, slider, readout);
      this.root.append(row);
      this.sliders.set(term, slider);
    }
  }

  // Re-assert the mirror (after ack, or snap back after nack).
  syncFromMirror(): void {
    for (const [term, slider] of this.sliders) {
      const value = this.store.weights[term] ?? 0;
      slider.value = String(weightToSlider(value));
      const readout = slider.parentElement?.querySelector(".readout");
      if (readout) readout.textContent = value.toPrecision(3);
    }
  }

  onNack(reason: string): void {
    this.toast.show(reason);
    this.syncFromMirror();
  }
}

export class GoalDragger {
  private dragging = false;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly store: SessionStore,
    private readonly client: SessionClient,
    private readonly view: Viewport,
  ) {
    canvas.addEventListener("pointerdown", (ev) => this.down(ev));
    canvas.addEventListener("pointermove", (ev) => this.move(ev));
    canvas.addEventListener("pointerup", (ev) => this.up(ev));
  }

  // world position of a pointer event, in canvas-local pixels
  private local(ev: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [ev.clientX - rect.left, ev.clientY - rect.top];
  }

  ghost: [number, number] | null = null; // drag preview, not sent yet

  private down(ev: PointerEvent): void {
    const [px, py] = this.local(ev);
    if (nearGoal(this.view, this.store.latestFrame, px, py)) {
      this.dragging = true;
      this.ghost = canvasToWorld(this.view, px, py);
    }
  }

  private move(ev: PointerEvent): void {
    if (!this.dragging) return;
    const [px, py] = this.local(ev);
    this.ghost = canvasToWorld(this.view, px, py);
  }

  private up(ev: PointerEvent): void {
    if (!this.dragging) return;
    this.dragging = false;
    const [px, py] = this.local(ev);
    const [x, z] = canvasToWorld(this.view, px, py);
    this.ghost = null;
    this.client.setTarget(x, z); // the command fires on drag end only
  }
}
