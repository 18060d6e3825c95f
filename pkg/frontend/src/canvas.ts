// Canvas overlay drawing. Pure functions over a 2D context so they can be
// exercised with a recording stub in tests.

import { colorFor } from "./colors.js";
import type { OutlierFlag } from "./types.js";
import type { PlacedPoint } from "./state.js";

export interface Ctx2D {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export function drawPoints(ctx: Ctx2D, points: PlacedPoint[], frame: number): void {
  for (const p of points) {
    ctx.beginPath();
    ctx.fillStyle = colorFor(p.keypoint);
    ctx.arc(p.x, p.y, 5, 0, 2 * Math.PI);
    ctx.fill();
    if (!p.submitted) {
      // hollow ring marks a point still queued for the server
      ctx.beginPath();
      ctx.strokeStyle = "#222222";
      ctx.lineWidth = 1;
      ctx.arc(p.x, p.y, 8, 0, 2 * Math.PI);
      ctx.stroke();
    }
    ctx.fillStyle = "#222222";
    ctx.font = "11px sans-serif";
    ctx.fillText(p.keypoint + (p.frame === frame ? "" : ` @${p.frame}`), p.x + 8, p.y - 8);
  }
}

/** Visualize one outlier flag: before position, after position, jump line. */
export function drawFlag(ctx: Ctx2D, flag: OutlierFlag): void {
  const [fx, fy] = flag.from;
  const [tx, ty] = flag.to;
  ctx.beginPath();
  ctx.strokeStyle = "#d62728";
  ctx.lineWidth = 2;
  ctx.moveTo(fx, fy);
  ctx.lineTo(tx, ty);
  ctx.stroke();

  ctx.beginPath();
  ctx.fillStyle = "#2ca02c";
  ctx.arc(fx, fy, 6, 0, 2 * Math.PI);
  ctx.fill();
  ctx.beginPath();
  ctx.fillStyle = "#d62728";
  ctx.arc(tx, ty, 6, 0, 2 * Math.PI);
  ctx.fill();

  ctx.fillStyle = "#d62728";
  ctx.font = "12px sans-serif";
  ctx.fillText(
    `${flag.keypoint}: ${flag.displacement.toFixed(1)} px jump at frame ${flag.frame}`,
    Math.min(fx, tx),
    Math.min(fy, ty) - 12,
  );
}
