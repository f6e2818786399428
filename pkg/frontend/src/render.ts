/**
 * Canvas scenes: cart-pendulum and SLIP, drawn from the latest frame.
 *
 * The cart angle is drawn raw (no wrapping), so a full rotation sweeps
 * continuously through the cut.  The camera tracks the body
 * horizontally for the hopper.
 */

import { StateFrame, SystemName } from "./protocol.js";
import { ViewState } from "./view.js";

const SCALE = 120; // px per unit length

export function drawScene(ctx: CanvasRenderingContext2D, system: SystemName,
                          view: ViewState): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.save();
  const frame = view.frame;
  if (system === "cart_pendulum") {
    drawCart(ctx, frame, width, height);
  } else {
    drawSlip(ctx, frame, width, height);
  }
  ctx.restore();
  drawIndicator(ctx, view, width);
  if (!view.connected) {
    drawOverlay(ctx, width, height, "connection lost - reconnecting");
  }
}

function drawCart(ctx: CanvasRenderingContext2D, frame: StateFrame | null,
                  width: number, height: number): void {
  const ground = height * 0.62;
  const x = frame ? frame.x : [Math.PI, 0, 0, 0];
  const theta = x[0];
  // camera follows the cart; the scrolling rail hatching shows motion
  const camX = x[2];
  const cartX = width / 2;
  ctx.strokeStyle = "#555";
  ctx.beginPath();
  ctx.moveTo(0, ground + 24);
  ctx.lineTo(width, ground + 24);
  ctx.stroke();
  ctx.strokeStyle = "#aaa";
  const startTick = Math.floor(camX - width / (2 * SCALE)) - 1;
  for (let gx = startTick; gx < camX + width / (2 * SCALE) + 1; gx += 0.5) {
    const sx = width / 2 + (gx - camX) * SCALE;
    ctx.beginPath();
    ctx.moveTo(sx, ground + 24);
    ctx.lineTo(sx - 10, ground + 36);
    ctx.stroke();
  }
  ctx.fillStyle = "#333";
  ctx.fillText(`x = ${x[2].toFixed(2)} m`, 12, 20);

  ctx.fillStyle = "#364a6b";
  ctx.fillRect(cartX - 40, ground, 80, 24);
  // theta = 0 is upright; positive sweeps clockwise on screen
  const tipX = cartX + SCALE * Math.sin(theta);
  const tipY = ground - SCALE * Math.cos(theta);
  ctx.strokeStyle = "#222";
  ctx.lineWidth = 5;
  ctx.beginPath();
  ctx.moveTo(cartX, ground);
  ctx.lineTo(tipX, tipY);
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#a33";
  ctx.beginPath();
  ctx.arc(tipX, tipY, 10, 0, 2 * Math.PI);
  ctx.fill();
}

function drawSlip(ctx: CanvasRenderingContext2D, frame: StateFrame | null,
                  width: number, height: number): void {
  const ground = height * 0.8;
  const x = frame ? frame.x : [0, 0, 1.05, 0, 0];
  const camX = x[0];
  const toScreenX = (wx: number) => width / 2 + (wx - camX) * SCALE;
  const toScreenY = (wz: number) => ground - wz * SCALE;

  ctx.strokeStyle = "#555";
  ctx.beginPath();
  ctx.moveTo(0, ground);
  ctx.lineTo(width, ground);
  ctx.stroke();
  // ground hatching scrolls with the camera
  ctx.strokeStyle = "#999";
  const start = Math.floor(camX - width / (2 * SCALE)) - 1;
  for (let gx = start; gx < camX + width / (2 * SCALE) + 1; gx += 0.5) {
    ctx.beginPath();
    ctx.moveTo(toScreenX(gx), ground);
    ctx.lineTo(toScreenX(gx - 0.15), ground + 12);
    ctx.stroke();
  }

  const bodyX = toScreenX(x[0]);
  const bodyY = toScreenY(x[2]);
  const toeX = toScreenX(x[4]);
  const inStance = Math.hypot(x[0] - x[4], x[2]) <= 1.0 + 1e-9;
  const toeY = inStance ? ground : Math.min(ground, bodyY + SCALE);
  ctx.strokeStyle = "#222";
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(bodyX, bodyY);
  ctx.lineTo(toeX, toeY);
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#364a6b";
  ctx.beginPath();
  ctx.arc(bodyX, bodyY, 16, 0, 2 * Math.PI);
  ctx.fill();
  ctx.fillStyle = "#a33";
  ctx.beginPath();
  ctx.arc(toeX, toeY, 5, 0, 2 * Math.PI);
  ctx.fill();
}

function drawIndicator(ctx: CanvasRenderingContext2D, view: ViewState,
                       width: number): void {
  ctx.fillStyle = view.verdictColor;
  ctx.fillRect(width - 36, 12, 24, 24);
  if (view.degraded) {
    ctx.fillStyle = "#d64545";
    ctx.fillText("deadline overrun", width - 140, 52);
  }
}

function drawOverlay(ctx: CanvasRenderingContext2D, width: number,
                     height: number, text: string): void {
  ctx.fillStyle = "rgba(0, 0, 0, 0.55)";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#fff";
  ctx.font = "20px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(text, width / 2, height / 2);
  ctx.textAlign = "start";
}
