// Operator console wiring: connect, render on animation frames, route edits.

import { SessionClient } from "./client.js";
import { GoalDragger, WeightPanel, type Toast } from "./controls.js";
import { costSeries, drawSeries, telemetrySeries } from "./plots.js";
import { renderFrame, worldToCanvas, type Ctx2D, type Viewport } from "./render.js";
import { SessionStore } from "./store.js";

function must<T>(value: T | null, label: string): T {
  if (value === null) throw new Error(`missing element: ${label}`);
  return value;
}

const app = must(document.querySelector<HTMLDivElement>("#app"), "#app");
app.innerHTML = `
  <header>
    <h1>planarmpc console</h1>
    <span id="status">connecting…</span>
    <span id="toast"></span>
  </header>
  <main>
    <canvas id="scene" width="840" height="480"></canvas>
    <aside>
      <section>
        <h2>weights</h2>
        <div id="weights"></div>
      </section>
      <section>
        <h2>solver</h2>
        <div id="params"></div>
      </section>
      <section>
        <h2>actions</h2>
        <button id="push-left">push ←</button>
        <button id="push-right">push →</button>
        <button id="pause">pause</button>
        <button id="resume">resume</button>
        <button id="reset">reset</button>
      </section>
    </aside>
  </main>
  <footer>
    <canvas id="costplot" width="560" height="120"></canvas>
    <canvas id="teleplot" width="560" height="120"></canvas>
  </footer>
`;

const scene = must(document.querySelector<HTMLCanvasElement>("#scene"), "#scene");
const costCanvas = must(document.querySelector<HTMLCanvasElement>("#costplot"),
                        "#costplot");
const teleCanvas = must(document.querySelector<HTMLCanvasElement>("#teleplot"),
                        "#teleplot");
const statusEl = must(document.querySelector<HTMLSpanElement>("#status"),
                      "#status");
const toastEl = must(document.querySelector<HTMLSpanElement>("#toast"),
                     "#toast");

const view: Viewport = {
  width: scene.width,
  height: scene.height,
  scale: 260,
  centerX: 0.0,
  groundY: scene.height - 60,
};

const toast: Toast = {
  show(text: string) {
    toastEl.textContent = text;
    toastEl.classList.add("visible");
    setTimeout(() => toastEl.classList.remove("visible"), 2500);
  },
};

const store = new SessionStore();
const client = new SessionClient(store, (event) => {
  if (event.kind === "catalog") {
    weights.rebuild();
    params.rebuild();
  } else if (event.kind === "ack") {
    weights.syncFromMirror();
    params.syncFromMirror();
  } else if (event.kind === "nack") {
    weights.onNack(event.reason);
    params.syncFromMirror();
  }
});

const weights = new WeightPanel(
  must(document.querySelector<HTMLDivElement>("#weights"), "#weights"),
  store, client, toast);

// solver knobs: plain number inputs committing on change
class ParamPanel {
  private inputs = new Map<string, HTMLInputElement>();

  constructor(private readonly root: HTMLElement) {}

  rebuild(): void {
    this.root.textContent = "";
    this.inputs.clear();
    for (const [path, value] of Object.entries(store.params)) {
      const row = document.createElement("label");
      row.className = "param-row";
      const name = document.createElement("span");
      name.textContent = path;
      const input = document.createElement("input");
      input.type = "number";
      input.value = String(value);
      input.addEventListener("change", () => {
        client.setParam(path, Number(input.value));
      });
      row.append(name, input);
      this.root.append(row);
      this.inputs.set(path, input);
    }
  }

  syncFromMirror(): void {
    for (const [path, input] of this.inputs) {
      input.value = String(store.params[path] ?? 0);
    }
  }
}

const params = new ParamPanel(
  must(document.querySelector<HTMLDivElement>("#params"), "#params"));

new GoalDragger(scene, store, client, view);

must(document.querySelector<HTMLButtonElement>("#push-left"), "#push-left")
  .addEventListener("click", () => client.push([-4.0, 0.0]));
must(document.querySelector<HTMLButtonElement>("#push-right"), "#push-right")
  .addEventListener("click", () => client.push([4.0, 0.0]));
must(document.querySelector<HTMLButtonElement>("#pause"), "#pause")
  .addEventListener("click", () => client.pause());
must(document.querySelector<HTMLButtonElement>("#resume"), "#resume")
  .addEventListener("click", () => client.resume());
must(document.querySelector<HTMLButtonElement>("#reset"), "#reset")
  .addEventListener("click", () => client.reset());

const url = new URLSearchParams(location.search).get("ws")
  ?? `ws://${location.hostname || "127.0.0.1"}:8765`;
client.connect(url);

function tick(): void {
  statusEl.textContent = `${store.connection}` +
    (store.role ? ` (${store.role})` : "");
  const ctx = scene.getContext("2d") as unknown as Ctx2D | null;
  if (ctx) {
    renderFrame(ctx, store.latestFrame, view);
  }
  const costCtx = costCanvas.getContext("2d") as unknown as Ctx2D | null;
  if (costCtx) {
    const terms = Object.keys(store.weights);
    drawSeries(costCtx, costCanvas.width, costCanvas.height,
               costSeries(store.costHistory.toArray(), terms));
  }
  const teleCtx = teleCanvas.getContext("2d") as unknown as Ctx2D | null;
  if (teleCtx) {
    drawSeries(teleCtx, teleCanvas.width, teleCanvas.height,
               telemetrySeries(store.telemetryHistory.toArray()));
  }
  requestAnimationFrame(tick);
}
requestAnimationFrame(tick);

export { store, client, view, worldToCanvas };
