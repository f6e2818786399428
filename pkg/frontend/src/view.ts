/**
 * View state: everything the canvas and panel display.
 *
 * Pure reducer over server frames; the client never simulates physics.
 * The verdict indicator always reflects the most recent state frame.
 */

import { MetricsFrame, StateFrame, Verdict } from "./protocol.js";

export const VERDICT_COLORS: Record<Verdict, string> = {
  accepted: "#2e9e4f",
  rejected: "#d64545",
  replaced: "#e09c2b",
  pass: "#888888",
};

export interface ViewState {
  connected: boolean;
  running: boolean;
  frame: StateFrame | null;
  verdictColor: string;
  pra: number;
  clock: number;
  duration: number;
  degraded: boolean;
  metrics: MetricsFrame | null;
  error: string | null;
}

export function initialView(): ViewState {
  return {
    connected: false,
    running: false,
    frame: null,
    verdictColor: VERDICT_COLORS.pass,
    pra: 0,
    clock: 0,
    duration: 30,
    degraded: false,
    metrics: null,
    error: null,
  };
}

export function onTrialStart(view: ViewState, duration: number): ViewState {
  return {
    ...initialView(),
    connected: view.connected,
    running: true,
    duration,
  };
}

export function onStateFrame(view: ViewState, frame: StateFrame): ViewState {
  return {
    ...view,
    running: true,
    frame,
    verdictColor: VERDICT_COLORS[frame.verdict] ?? VERDICT_COLORS.pass,
    pra: frame.pra,
    clock: frame.t,
    degraded: Boolean(frame.degraded),
  };
}

export function onMetrics(view: ViewState, metrics: MetricsFrame): ViewState {
  return { ...view, running: false, metrics };
}

export function onError(view: ViewState, detail: string): ViewState {
  return { ...view, error: detail };
}

export function onConnection(view: ViewState, connected: boolean): ViewState {
  return { ...view, connected, running: connected && view.running };
}

/** Remaining trial time, clamped at zero. */
export function countdown(view: ViewState): number {
  return Math.max(0, view.duration - view.clock);
}
