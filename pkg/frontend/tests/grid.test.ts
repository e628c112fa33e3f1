import { describe, expect, it } from "vitest";

import { FREE, GridState, OCCUPIED, UNKNOWN, base64ToBytes } from "../src/grid.js";
import { parseGatewayMessage, type HelloMsg } from "../src/protocol.js";
import { nodeInflate, transcriptLines } from "./helpers.js";

describe("grid decoding", () => {
  it("decodes the hello payload from the recorded transcript", async () => {
    const hello = parseGatewayMessage(transcriptLines()[0]) as HelloMsg;
    const grid = new GridState();
    await grid.applyHello(hello.grid, nodeInflate);
    expect(grid.rows).toBe(hello.grid.rows);
    expect(grid.cols).toBe(hello.grid.cols);
    expect(grid.cells.length).toBe(grid.rows * grid.cols);
    expect(grid.resolution).toBeCloseTo(0.1);
    // the robot has been sensing for a while before the hello
    expect(grid.count(FREE)).toBeGreaterThan(100);
  });

  it("applies incremental changes and tracks pending cells", () => {
    const grid = new GridState();
    grid.rows = 10;
    grid.cols = 10;
    grid.cells = new Uint8Array(100);
    grid.applyChanges([
      [0, 0, FREE],
      [5, 5, OCCUPIED],
      [99, 99, FREE], // out of range: ignored
    ]);
    expect(grid.cells[0]).toBe(FREE);
    expect(grid.cells[55]).toBe(OCCUPIED);
    const pending = grid.takePending();
    expect(pending.size).toBe(2);
    expect(grid.takePending().size).toBe(0);
    expect(grid.count(UNKNOWN)).toBe(98);
  });

  it("base64 decoding matches Buffer semantics", () => {
    const bytes = base64ToBytes("AAEC/w==");
    expect(Array.from(bytes)).toEqual([0, 1, 2, 255]);
  });
});
