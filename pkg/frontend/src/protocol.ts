/**
 * Wire protocol of the session server (JSON text frames over a WebSocket).
 *
 * Client -> server: start / input / stop.
 * Server -> client: state / metrics / error.
 */

export type SystemName = "cart_pendulum" | "slip";
export type FilterMode = "training" | "assistance" | "off";
export type Verdict = "accepted" | "rejected" | "replaced" | "pass";

export interface StartMsg {
  type: "start";
  system: SystemName;
  mode: FilterMode;
  seed: number;
  duration_s: number;
}

export interface InputMsg {
  type: "input";
  u: number[];
}

export interface StopMsg {
  type: "stop";
}

export type ClientMsg = StartMsg | InputMsg | StopMsg;

export interface StateFrame {
  type: "state";
  t: number;
  x: number[];
  verdict: Verdict;
  mig: number | null;
  pra: number;
  degraded?: boolean;
}

export interface MetricsFrame {
  type: "metrics";
  success: boolean;
  time_to_success: number;
  balance_time: number;
  rms_error: number | null;
  pra: number;
  fallen?: boolean;
  fall_time?: number | null;
  mean_forward_speed?: number | null;
  overruns?: number;
}

export interface ErrorFrame {
  type: "error";
  detail: string;
}

export type ServerMsg = StateFrame | MetricsFrame | ErrorFrame;

export const INPUT_DIM: Record<SystemName, number> = {
  cart_pendulum: 1,
  slip: 2,
};

/** Saturation bounds mirrored from the plant models (display-side clamp). */
export const INPUT_LIMIT: Record<SystemName, number[]> = {
  cart_pendulum: [20],
  slip: [2, 2],
};

export function encodeStart(system: SystemName, mode: FilterMode, seed: number,
                            durationS: number): string {
  const msg: StartMsg = { type: "start", system, mode, seed, duration_s: durationS };
  return JSON.stringify(msg);
}

export function encodeInput(u: number[]): string {
  const msg: InputMsg = { type: "input", u };
  return JSON.stringify(msg);
}

export function encodeStop(): string {
  return JSON.stringify({ type: "stop" });
}

/** Parse a server frame; returns null for anything malformed. */
export function decodeServerMsg(raw: string): ServerMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null || !("type" in obj)) return null;
  const m = obj as Record<string, unknown>;
  switch (m.type) {
    case "state":
      if (!Array.isArray(m.x) || typeof m.t !== "number") return null;
      if (typeof m.verdict !== "string") return null;
      return m as unknown as StateFrame;
    case "metrics":
      return m as unknown as MetricsFrame;
    case "error":
      return typeof m.detail === "string" ? (m as unknown as ErrorFrame) : null;
    default:
      return null;
  }
}
