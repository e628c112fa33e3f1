/**
 * Console view model: everything the four panels display, rebuilt purely
 * from gateway messages. The console never extrapolates robot state, so a
 * page reload reconstructs the full display from the next hello/snapshots.
 */

import { GridState, type InflateFn } from "./grid.js";
import {
  GatewayMessage,
  MediaFrame,
  ProtocolError,
  RepresentMsg,
  StatusMsg,
  TelemetryMsg,
  parseGatewayMessage,
} from "./protocol.js";

export interface FrameInfo {
  seq: number;
  stampMs: number;
  payload: Uint8Array;
  receivedAt: number;
}

export class ConsoleViewModel {
  grid = new GridState();
  pose: [number, number, number] | null = null;
  trajectory: [number, number, number, number][] = [];
  telemetry: TelemetryMsg | null = null;
  status: StatusMsg | null = null;
  lastFrame: FrameInfo | null = null;
  lastError: string | null = null;
  /** true when the latest inbound message could not be applied */
  staleData = false;
  /** bumped whenever something displayable changed */
  revision = 0;

  constructor(private inflate: InflateFn) {}

  /** Apply one text message; returns its type or null when rejected. */
  async applyText(text: string): Promise<string | null> {
    let msg: GatewayMessage;
    try {
      msg = parseGatewayMessage(text);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.staleData = true;
        return null;
      }
      throw err;
    }
    switch (msg.type) {
      case "hello":
        await this.grid.applyHello(msg.grid, this.inflate);
        break;
      case "represent":
        this.applyRepresent(msg);
        break;
      case "telemetry":
        this.telemetry = msg;
        break;
      case "status":
        this.status = msg;
        break;
      case "error":
        this.lastError = msg.error;
        break;
      case "pong":
        break;
    }
    this.staleData = false;
    this.revision++;
    return msg.type;
  }

  applyRepresent(msg: RepresentMsg): void {
    if (msg.pose) this.pose = msg.pose;
    if (msg.trajectory_tail.length) this.trajectory = msg.trajectory_tail;
    this.grid.applyChanges(msg.grid_changes);
  }

  applyFrame(frame: MediaFrame, receivedAt: number): void {
    if (this.lastFrame && frame.seq <= this.lastFrame.seq) return;
    this.lastFrame = {
      seq: frame.seq,
      stampMs: frame.stampMs,
      payload: frame.payload,
      receivedAt,
    };
    this.revision++;
  }

  /** Frame age in ms, making the video-path delay visible to the operator. */
  frameAgeMs(now: number): number | null {
    if (!this.lastFrame) return null;
    return now - this.lastFrame.receivedAt;
  }

  linkState(): string {
    return this.status?.link ?? "DOWN";
  }

  /** The interruption banner shows on link loss or while autonomy drives. */
  interruptionBanner(): boolean {
    if (!this.status) return false;
    return this.status.link === "DOWN" || this.status.mode === "AUTONOMY_SAFEPOINT";
  }

  autonomyActive(): boolean {
    return this.status?.mode === "AUTONOMY_SAFEPOINT";
  }
}

/** "12.4 V" style panel text; missing values render as an em dash. */
export function formatField(value: number | null | undefined, unit: string, digits = 1): string {
  if (value === null || value === undefined || !Number.isFinite(value)) return "—";
  return `${value.toFixed(digits)}${unit ? " " + unit : ""}`;
}

export interface PanelText {
  battery: string;
  position: string;
  speed: string;
  compass: string;
  gps: string;
  delay: string;
  jitter: string;
  link: string;
  mode: string;
}

export function panelText(vm: ConsoleViewModel): PanelText {
  const t = vm.telemetry;
  const s = vm.status;
  return {
    battery: formatField(t?.battery_v, "V"),
    position: t
      ? `${t.x.toFixed(2)}, ${t.y.toFixed(2)} m @ ${((t.theta * 180) / Math.PI).toFixed(1)}°`
      : "—",
    speed: t ? `${t.v.toFixed(2)} m/s, ${t.w.toFixed(2)} rad/s` : "—",
    compass: formatField(t?.compass_deg, "°"),
    gps: t ? `${t.lat.toFixed(5)}, ${t.lon.toFixed(5)}` : "—",
    delay: formatField(s?.delay_ms, "ms", 0),
    jitter: formatField(s?.jitter_ms, "ms", 0),
    link: s?.link ?? "—",
    mode: s?.mode ?? "—",
  };
}
