import { describe, expect, it } from "vitest";

import {
  ProtocolError,
  connectMsg,
  disconnectMsg,
  driveMsg,
  joystickMsg,
  modeMsg,
  parseGatewayMessage,
  parseMediaFrame,
  ptzMsg,
  stopMsg,
} from "../src/protocol.js";
import { transcriptLines } from "./helpers.js";

describe("outbound messages match the documented gateway schema", () => {
  it("drive", () => {
    expect(JSON.parse(driveMsg(0.5, -0.1))).toEqual({ type: "drive", v: 0.5, w: -0.1 });
  });

  it("stop", () => {
    expect(JSON.parse(stopMsg())).toEqual({ type: "stop" });
  });

  it("ptz", () => {
    expect(JSON.parse(ptzMsg(100, -25, 2))).toEqual({ type: "ptz", pan: 100, tilt: -25, zoom: 2 });
  });

  it("mode", () => {
    expect(JSON.parse(modeMsg("ASSISTED"))).toEqual({ type: "mode", mode: "ASSISTED" });
  });

  it("joystick carries integer 10-bit axes", () => {
    expect(JSON.parse(joystickMsg([512, 1023], 3))).toEqual({
      type: "joystick",
      axes: [512, 1023],
      buttons: 3,
    });
    expect(() => joystickMsg([0, 1024])).toThrow(ProtocolError);
    expect(() => joystickMsg([-1, 0])).toThrow(ProtocolError);
  });

  it("connect and disconnect", () => {
    expect(JSON.parse(connectMsg())).toEqual({ type: "connect" });
    expect(JSON.parse(disconnectMsg())).toEqual({ type: "disconnect" });
  });
});

describe("inbound parsing", () => {
  it("accepts every message in the recorded transcript", () => {
    for (const line of transcriptLines()) {
      const msg = parseGatewayMessage(line);
      expect(["hello", "represent", "telemetry", "status"]).toContain(msg.type);
    }
  });

  it("rejects foreign types and non-JSON", () => {
    expect(() => parseGatewayMessage('{"type":"teleport"}')).toThrow(ProtocolError);
    expect(() => parseGatewayMessage("nope")).toThrow(ProtocolError);
    expect(() => parseGatewayMessage("[1,2]")).toThrow(ProtocolError);
  });

  it("parses media frame headers (u16 seq, u32 stamp, big endian)", () => {
    const buf = new ArrayBuffer(9);
    const view = new DataView(buf);
    view.setUint16(0, 42, false);
    view.setUint32(2, 123456, false);
    new Uint8Array(buf).set([1, 2, 3], 6);
    const frame = parseMediaFrame(buf);
    expect(frame.seq).toBe(42);
    expect(frame.stampMs).toBe(123456);
    expect(Array.from(frame.payload)).toEqual([1, 2, 3]);
    expect(() => parseMediaFrame(new ArrayBuffer(3))).toThrow(ProtocolError);
  });
});
