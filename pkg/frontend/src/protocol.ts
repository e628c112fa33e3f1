/**
 * Gateway wire contract: the exact JSON messages exchanged with the
 * operator client's WebSocket gateway, and the binary media frame header.
 *
 * The console must never emit anything outside this schema.
 */

export interface HelloGrid {
  rows: number;
  cols: number;
  resolution: number;
  origin: [number, number];
  cells: string; // base64 of zlib-compressed row-major uint8
}

export interface HelloMsg {
  type: "hello";
  grid: HelloGrid;
}

export interface RepresentMsg {
  type: "represent";
  t: number;
  pose: [number, number, number] | null;
  trajectory_tail: [number, number, number, number][]; // [stamp, x, y, theta]
  grid_changes: [number, number, number][]; // [row, col, value]
}

export interface TelemetryMsg {
  type: "telemetry";
  seq: number;
  stamp_ms: number;
  battery_v: number;
  x: number;
  y: number;
  theta: number;
  v: number;
  w: number;
  compass_deg: number;
  lat: number;
  lon: number;
  sonar: number[]; // -1 encodes no echo
  laser: number[];
}

export interface StatusMsg {
  type: "status";
  t: number;
  delay_ms: number;
  jitter_ms: number;
  link: "UP" | "DEGRADED" | "DOWN";
  mode: string;
  connected: boolean;
}

export interface ErrorMsg {
  type: "error";
  error: string;
}

export interface PongMsg {
  type: "pong";
}

export type GatewayMessage =
  | HelloMsg
  | RepresentMsg
  | TelemetryMsg
  | StatusMsg
  | ErrorMsg
  | PongMsg;

const INBOUND_TYPES = new Set([
  "hello",
  "represent",
  "telemetry",
  "status",
  "error",
  "pong",
]);

export class ProtocolError extends Error {}

export function parseGatewayMessage(text: string): GatewayMessage {
  let body: unknown;
  try {
    body = JSON.parse(text);
  } catch (err) {
    throw new ProtocolError(`not JSON: ${err}`);
  }
  if (typeof body !== "object" || body === null || !("type" in body)) {
    throw new ProtocolError("message needs a type field");
  }
  const type = (body as { type: unknown }).type;
  if (typeof type !== "string" || !INBOUND_TYPES.has(type)) {
    throw new ProtocolError(`unknown gateway message type ${String(type)}`);
  }
  return body as GatewayMessage;
}

// ---------------------------------------------------------------- outbound

export function driveMsg(v: number, w: number): string {
  return JSON.stringify({ type: "drive", v, w });
}

export function stopMsg(): string {
  return JSON.stringify({ type: "stop" });
}

export function ptzMsg(pan: number, tilt: number, zoom: number): string {
  return JSON.stringify({ type: "ptz", pan, tilt, zoom });
}

export function modeMsg(mode: "MANUAL" | "ASSISTED" | "AUTONOMY_SAFEPOINT"): string {
  return JSON.stringify({ type: "mode", mode });
}

export function joystickMsg(axes: [number, number], buttons = 0): string {
  const [h, v] = axes;
  if (!Number.isInteger(h) || !Number.isInteger(v) || h < 0 || h > 1023 || v < 0 || v > 1023) {
    throw new ProtocolError(`joystick axes out of range: ${h}, ${v}`);
  }
  return JSON.stringify({ type: "joystick", axes: [h, v], buttons });
}

export function connectMsg(): string {
  return JSON.stringify({ type: "connect" });
}

export function disconnectMsg(): string {
  return JSON.stringify({ type: "disconnect" });
}

export function pingMsg(): string {
  return JSON.stringify({ type: "ping" });
}

// ------------------------------------------------------------ media frames

export interface MediaFrame {
  seq: number;
  stampMs: number;
  payload: Uint8Array;
}

/** Binary frames carry a 6-byte header: u16 sequence, u32 timestamp (BE). */
export function parseMediaFrame(data: ArrayBuffer): MediaFrame {
  if (data.byteLength < 6) {
    throw new ProtocolError("media frame shorter than its header");
  }
  const view = new DataView(data);
  return {
    seq: view.getUint16(0, false),
    stampMs: view.getUint32(2, false),
    payload: new Uint8Array(data, 6),
  };
}
