import { describe, expect, it } from "vitest";

import { ControlPanel, GamepadPoller, axisToCount, inDeadzone } from "../src/controls.js";

function collector(): { sent: object[]; send: (text: string) => void } {
  const sent: object[] = [];
  return { sent, send: (text) => sent.push(JSON.parse(text)) };
}

describe("arrow buttons and keyboard", () => {
  it("press forward then stop emits the documented pair", () => {
    const { sent, send } = collector();
    const panel = new ControlPanel(send, 0.6, 0.5);
    panel.forward();
    panel.stop();
    expect(sent).toEqual([
      { type: "drive", v: 0.6, w: 0 },
      { type: "stop" },
    ]);
  });

  it("keyboard arrows mirror the buttons; release stops", () => {
    const { sent, send } = collector();
    const panel = new ControlPanel(send, 0.6, 0.5);
    expect(panel.keydown("ArrowLeft")).toBe(true);
    expect(panel.keyup("ArrowLeft")).toBe(true);
    expect(panel.keydown("x")).toBe(false);
    expect(sent).toEqual([
      { type: "drive", v: 0, w: 0.5 },
      { type: "stop" },
    ]);
  });

  it("ptz slider to the pan limit emits pan 100", () => {
    const { sent, send } = collector();
    new ControlPanel(send).ptz(100, 0, 1);
    expect(sent).toEqual([{ type: "ptz", pan: 100, tilt: 0, zoom: 1 }]);
  });

  it("mode and session controls", () => {
    const { sent, send } = collector();
    const panel = new ControlPanel(send);
    panel.setMode("ASSISTED");
    panel.connect();
    panel.disconnect();
    expect(sent).toEqual([
      { type: "mode", mode: "ASSISTED" },
      { type: "connect" },
      { type: "disconnect" },
    ]);
  });
});

describe("gamepad polling", () => {
  it("axis mapping is centered and clamped", () => {
    expect(axisToCount(0)).toBe(512);
    expect(axisToCount(1)).toBe(1023);
    expect(axisToCount(-1)).toBe(1);
    expect(inDeadzone(512)).toBe(true);
    expect(inDeadzone(529)).toBe(false);
  });

  it("sends no traffic at center, then one centering message after motion", () => {
    const { sent, send } = collector();
    let axes: [number, number] = [0, 0];
    const pads = new GamepadPoller(send, () => axes, 100);
    expect(pads.poll(0)).toBe(false); // centered from the start: silence
    expect(pads.poll(200)).toBe(false);
    axes = [0.5, -0.8]; // push
    expect(pads.poll(400)).toBe(true);
    axes = [0, 0]; // back to rest: exactly one stop message
    expect(pads.poll(600)).toBe(true);
    expect(pads.poll(800)).toBe(false);
    expect(sent.length).toBe(2);
    const push = sent[0] as { type: string; axes: [number, number] };
    expect(push.type).toBe("joystick");
    expect(push.axes[0]).toBeGreaterThan(512 + 16);
    expect(push.axes[1]).toBeGreaterThan(512 + 16); // up is forward
    const rest = sent[1] as { axes: [number, number] };
    expect(rest.axes).toEqual([512, 512]);
  });

  it("throttles to its period (10 Hz default)", () => {
    const { sent, send } = collector();
    const pads = new GamepadPoller(send, () => [0.7, 0] as [number, number], 100);
    for (let t = 0; t < 1000; t += 16.7) pads.poll(t);
    expect(sent.length).toBeLessThanOrEqual(10);
    expect(sent.length).toBeGreaterThanOrEqual(9);
  });
});
