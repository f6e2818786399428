/**
 * Page wiring: trial panel, render loop, input pump.
 *
 * Rendering never blocks input capture; both run off the same
 * requestAnimationFrame tick, sending at most one input message per
 * display frame while a trial is active.
 */

import { SessionClient } from "./client.js";
import { InputSource } from "./input.js";
import { FilterMode, MetricsFrame, SystemName } from "./protocol.js";
import { drawScene } from "./render.js";
import {
  countdown,
  initialView,
  onConnection,
  onError,
  onMetrics,
  onStateFrame,
  onTrialStart,
  ViewState,
} from "./view.js";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

let view: ViewState = initialView();
let system: SystemName = "cart_pendulum";
let input = new InputSource(system, 0.5);
let client: SessionClient | null = null;

function connect(): void {
  client?.close();
  const url = ($("server-url") as HTMLInputElement).value;
  client = new SessionClient(url, {
    onMessage: (msg) => {
      if (msg.type === "state") view = onStateFrame(view, msg);
      else if (msg.type === "metrics") showMetrics(msg);
      else view = onError(view, msg.detail);
    },
    onConnection: (ok) => {
      view = onConnection(view, ok);
    },
  });
  client.connect();
}

function showMetrics(metrics: MetricsFrame): void {
  view = onMetrics(view, metrics);
  const rows: [string, string][] = [
    ["success", String(metrics.success)],
    ["time to success", `${metrics.time_to_success.toFixed(2)} s`],
    ["balance time", `${metrics.balance_time.toFixed(2)} s`],
    ["RMS error", metrics.rms_error === null ? "-" : metrics.rms_error.toFixed(3)],
    ["PRA", `${(metrics.pra * 100).toFixed(1)}%`],
  ];
  if (metrics.fallen !== undefined) rows.push(["fallen", String(metrics.fallen)]);
  $("metrics").innerHTML = rows
    .map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`)
    .join("");
  setTrialControls(false);
}

function setTrialControls(running: boolean): void {
  ($("start") as HTMLButtonElement).disabled = running;
  ($("stop") as HTMLButtonElement).disabled = !running;
  // selectors are hidden while a trial runs
  $("selectors").style.display = running ? "none" : "block";
}

function startTrial(): void {
  system = ($("system") as HTMLSelectElement).value as SystemName;
  const mode = ($("mode") as HTMLSelectElement).value as FilterMode;
  const seed = Number(($("seed") as HTMLInputElement).value) >>> 0;
  const duration = Number(($("duration") as HTMLInputElement).value) || 30;
  input = new InputSource(system, 0.5);
  view = onTrialStart(view, duration);
  $("metrics").innerHTML = "";
  client?.start(system, mode, seed, duration);
  setTrialControls(true);
}

function stopTrial(): void {
  client?.stop();
}

function frame(ts: number): void {
  if (view.running && client?.ready) {
    const u = input.sample(ts);
    if (u !== null) client.sendInput(u);
  }
  const canvas = $("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (ctx) drawScene(ctx, system, view);
  $("clock").textContent = `${countdown(view).toFixed(1)} s`;
  $("pra").textContent = `${(view.pra * 100).toFixed(0)}%`;
  if (view.error) {
    $("error").textContent = view.error;
    view = { ...view, error: null };
  }
  requestAnimationFrame(frame);
}

window.addEventListener("keydown", (ev) => {
  if (!ev.repeat) input.keyDown(ev.code);
});
window.addEventListener("keyup", (ev) => input.keyUp(ev.code));
window.addEventListener("blur", () => input.releaseAll());

// pointer drag on the canvas, secondary to the keyboard
const sceneEl = $("scene") as HTMLCanvasElement;
const DRAG_SPAN = 150; // px for a full-scale command
let dragAnchor: [number, number] | null = null;
sceneEl.addEventListener("pointerdown", (ev) => {
  dragAnchor = [ev.clientX, ev.clientY];
  sceneEl.setPointerCapture(ev.pointerId);
});
sceneEl.addEventListener("pointermove", (ev) => {
  if (!dragAnchor) return;
  const dx = (ev.clientX - dragAnchor[0]) / DRAG_SPAN;
  const dy = (dragAnchor[1] - ev.clientY) / DRAG_SPAN;
  input.setDrag(system === "slip" ? [dy, dx] : [dx]);
});
sceneEl.addEventListener("pointerup", () => {
  dragAnchor = null;
  input.setDrag(null);
});

$("start").addEventListener("click", startTrial);
$("stop").addEventListener("click", stopTrial);
$("connect").addEventListener("click", connect);

connect();
setTrialControls(false);
requestAnimationFrame(frame);
