/**
 * Keyboard capture: held keys map to a saturated input vector.
 *
 * Cart: left/right arrows (or A/D) drive cart acceleration.
 * SLIP: W/S is leg thrust, A/D (or arrows) is toe velocity.
 * Opposite keys cancel; releasing everything yields zero.  One input
 * message per display frame at most, timestamps strictly monotonic.
 */

import { INPUT_DIM, INPUT_LIMIT, SystemName } from "./protocol.js";

interface AxisKeys {
  positive: string[];
  negative: string[];
}

const CART_AXES: AxisKeys[] = [
  { positive: ["ArrowRight", "KeyD"], negative: ["ArrowLeft", "KeyA"] },
];

const SLIP_AXES: AxisKeys[] = [
  { positive: ["KeyW", "ArrowUp"], negative: ["KeyS", "ArrowDown"] },
  { positive: ["KeyD", "ArrowRight"], negative: ["KeyA", "ArrowLeft"] },
];

export class InputSource {
  private held = new Set<string>();
  private lastTimestamp = -1;
  private axes: AxisKeys[];
  private limits: number[];
  private drag: number[] | null = null;  // per-axis fraction in [-1, 1]
  /** Fraction of the saturation range a held key commands. */
  scale: number;

  constructor(system: SystemName, scale = 1.0) {
    this.axes = system === "slip" ? SLIP_AXES : CART_AXES;
    this.limits = INPUT_LIMIT[system];
    this.scale = scale;
    if (this.axes.length !== INPUT_DIM[system]) {
      throw new Error("axis map does not match the input dimension");
    }
  }

  keyDown(code: string): void {
    this.held.add(code);
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  releaseAll(): void {
    this.held.clear();
    this.drag = null;
  }

  /**
   * Pointer drag, secondary to the keyboard: fractions of the drag span
   * per axis in [-1, 1].  Cart uses dx only; the hopper maps dy to
   * thrust and dx to toe velocity.  Null ends the drag.
   */
  setDrag(fractions: number[] | null): void {
    if (fractions === null) {
      this.drag = null;
      return;
    }
    this.drag = this.axes.map((_, i) =>
      Math.max(-1, Math.min(1, fractions[i] ?? 0)));
  }

  /** Current input vector; opposite keys cancel, output is clamped. */
  current(): number[] {
    return this.axes.map((axis, i) => {
      let v = 0;
      if (axis.positive.some((k) => this.held.has(k))) v += 1;
      if (axis.negative.some((k) => this.held.has(k))) v -= 1;
      if (v === 0 && this.drag !== null) v = this.drag[i];
      const lim = this.limits[i];
      const out = v * this.scale * lim;
      return Math.max(-lim, Math.min(lim, out));
    });
  }

  /**
   * Sample for one display frame.  Returns null when this frame already
   * produced a message (monotonic timestamps, at most one per frame).
   */
  sample(timestampMs: number): number[] | null {
    if (timestampMs <= this.lastTimestamp) return null;
    this.lastTimestamp = timestampMs;
    return this.current();
  }
}
