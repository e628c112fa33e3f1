/**
 * Canvas rendering for the virtual represent and the sensor widgets.
 *
 * The grid is painted incrementally onto a backing canvas (one pixel per
 * cell) and blitted scaled each frame, so a redraw costs a handful of
 * draw calls regardless of map size. Rendering targets a minimal 2D
 * context interface, which keeps it testable without a DOM.
 */

import { FREE, OCCUPIED } from "./grid.js";
import type { ConsoleViewModel } from "./state.js";

export const COLORS = {
  unknown: "#23272d",
  free: "#3d4753",
  occupied: "#ff7043", // suspected obstacles stand out
  trajectory: "#4fc3f7",
  robot: "#ffee58",
  laser: "#66bb6a",
  sonarOk: "#4fc3f7",
  sonarNear: "#ff7043",
};

/** Subset of CanvasRenderingContext2D the renderers touch. */
export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  closePath(): void;
}

export interface BlitSource {
  // CanvasImageSource in the browser; opaque to the renderer
}

export interface BlitTarget extends Ctx2D {
  drawImage(src: BlitSource, dx: number, dy: number, dw: number, dh: number): void;
}

function cellColor(value: number): string {
  if (value === OCCUPIED) return COLORS.occupied;
  if (value === FREE) return COLORS.free;
  return COLORS.unknown;
}

export class MapRenderer {
  drawCalls = 0;

  constructor(
    private backing: Ctx2D,
    private backingSource: BlitSource,
  ) {}

  /** Paint pending grid cells onto the backing canvas (1 px per cell). */
  paintPending(vm: ConsoleViewModel): number {
    const grid = vm.grid;
    const pending = grid.takePending();
    for (const [idx, value] of pending) {
      const r = Math.floor(idx / grid.cols);
      const c = idx % grid.cols;
      this.backing.fillStyle = cellColor(value);
      // canvas y grows downward; world rows grow upward
      this.backing.fillRect(c, grid.rows - 1 - r, 1, 1);
      this.drawCalls++;
    }
    return pending.size;
  }

  /** Blit the map and draw trajectory + pose arrow onto the display. */
  draw(ctx: BlitTarget, vm: ConsoleViewModel, width: number, height: number): void {
    const grid = vm.grid;
    ctx.fillStyle = COLORS.unknown;
    ctx.fillRect(0, 0, width, height);
    if (grid.rows === 0) return;
    ctx.drawImage(this.backingSource, 0, 0, width, height);
    this.drawCalls += 2;

    const sx = width / grid.cols;
    const sy = height / grid.rows;
    const toPx = (x: number, y: number): [number, number] => [
      ((x - grid.origin[0]) / grid.resolution) * sx,
      height - ((y - grid.origin[1]) / grid.resolution) * sy,
    ];

    if (vm.trajectory.length > 1) {
      ctx.strokeStyle = COLORS.trajectory;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      const [x0, y0] = toPx(vm.trajectory[0][1], vm.trajectory[0][2]);
      ctx.moveTo(x0, y0);
      for (const [, x, y] of vm.trajectory.slice(1)) {
        const [px, py] = toPx(x, y);
        ctx.lineTo(px, py);
      }
      ctx.stroke();
      this.drawCalls++;
    }

    if (vm.pose) {
      const [x, y, theta] = vm.pose;
      const [px, py] = toPx(x, y);
      const len = Math.max(10, 3 / grid.resolution * sx * 0.1);
      ctx.fillStyle = COLORS.robot;
      ctx.strokeStyle = COLORS.robot;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(px + len * Math.cos(-theta), py + len * Math.sin(-theta));
      ctx.lineTo(
        px + 0.45 * len * Math.cos(-theta + 2.5),
        py + 0.45 * len * Math.sin(-theta + 2.5),
      );
      ctx.lineTo(
        px + 0.45 * len * Math.cos(-theta - 2.5),
        py + 0.45 * len * Math.sin(-theta - 2.5),
      );
      ctx.closePath();
      ctx.fill();
      this.drawCalls++;
    }
  }
}

/** Polar sweep of the latest laser scan (fov 100 deg, robot at bottom). */
export function drawLaserSweep(
  ctx: Ctx2D,
  laser: number[],
  width: number,
  height: number,
  maxRange = 20.0,
): void {
  ctx.fillStyle = "#14171c";
  ctx.fillRect(0, 0, width, height);
  const cx = width / 2;
  const cy = height - 4;
  const scale = (height - 10) / maxRange;
  ctx.strokeStyle = COLORS.laser;
  ctx.lineWidth = 1;
  ctx.beginPath();
  const n = laser.length;
  for (let i = 0; i < n; i++) {
    const r = laser[i] < 0 ? maxRange : Math.min(laser[i], maxRange);
    const angle = Math.PI / 2 + ((i / (n - 1)) - 0.5) * (100 * Math.PI) / 180;
    const x = cx + r * scale * Math.cos(angle);
    const y = cy - r * scale * Math.sin(angle);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  }
  ctx.stroke();
}

/** Horizontal bars for the eight sonar ranges; no-echo draws full+dim. */
export function drawSonarBars(
  ctx: Ctx2D,
  sonar: number[],
  width: number,
  height: number,
): void {
  ctx.fillStyle = "#14171c";
  ctx.fillRect(0, 0, width, height);
  const barH = height / sonar.length;
  sonar.forEach((r, i) => {
    const noEcho = r < 0;
    const frac = noEcho ? 1.0 : Math.min(r / 4.0, 1.0);
    ctx.fillStyle = noEcho ? COLORS.free : r < 0.5 ? COLORS.sonarNear : COLORS.sonarOk;
    ctx.fillRect(2, i * barH + 1, Math.max(frac * (width - 4), 2), barH - 2);
  });
}
