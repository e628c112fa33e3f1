/** Occupancy grid state decoded from gateway messages. */

import type { HelloGrid } from "./protocol.js";

export const UNKNOWN = 0;
export const FREE = 1;
export const OCCUPIED = 2;

export type InflateFn = (data: Uint8Array) => Promise<Uint8Array>;

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export class GridState {
  rows = 0;
  cols = 0;
  resolution = 0.1;
  origin: [number, number] = [0, 0];
  cells: Uint8Array = new Uint8Array(0);
  /** cells touched since the last render, as flat indices */
  pending: Map<number, number> = new Map();

  async applyHello(grid: HelloGrid, inflate: InflateFn): Promise<void> {
    const raw = await inflate(base64ToBytes(grid.cells));
    if (raw.length !== grid.rows * grid.cols) {
      throw new Error(`grid payload ${raw.length} != ${grid.rows}x${grid.cols}`);
    }
    this.rows = grid.rows;
    this.cols = grid.cols;
    this.resolution = grid.resolution;
    this.origin = grid.origin;
    this.cells = raw;
    this.pending.clear();
    for (let i = 0; i < raw.length; i++) {
      if (raw[i] !== UNKNOWN) this.pending.set(i, raw[i]);
    }
  }

  applyChanges(changes: [number, number, number][]): void {
    for (const [r, c, v] of changes) {
      if (r < 0 || r >= this.rows || c < 0 || c >= this.cols) continue;
      const idx = r * this.cols + c;
      this.cells[idx] = v;
      this.pending.set(idx, v);
    }
  }

  takePending(): Map<number, number> {
    const out = this.pending;
    this.pending = new Map();
    return out;
  }

  count(value: number): number {
    let n = 0;
    for (const v of this.cells) if (v === value) n++;
    return n;
  }
}
