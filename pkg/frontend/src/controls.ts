/**
 * Manual control inputs: arrow buttons (mirrored on the keyboard), the
 * stop button, PTZ sliders, mode switches and gamepad polling. Everything
 * funnels through a send callback so the emitted traffic is exactly the
 * documented gateway schema.
 */

import {
  connectMsg,
  disconnectMsg,
  driveMsg,
  joystickMsg,
  modeMsg,
  ptzMsg,
  stopMsg,
} from "./protocol.js";

export type SendFn = (text: string) => void;

export class ControlPanel {
  constructor(
    private send: SendFn,
    public presetSpeed = 0.6,
    public presetTurn = 0.5,
  ) {}

  forward(): void {
    this.send(driveMsg(this.presetSpeed, 0));
  }

  backward(): void {
    this.send(driveMsg(-this.presetSpeed, 0));
  }

  turnLeft(): void {
    this.send(driveMsg(0, this.presetTurn));
  }

  turnRight(): void {
    this.send(driveMsg(0, -this.presetTurn));
  }

  stop(): void {
    this.send(stopMsg());
  }

  ptz(pan: number, tilt: number, zoom: number): void {
    this.send(ptzMsg(pan, tilt, zoom));
  }

  setMode(mode: "MANUAL" | "ASSISTED" | "AUTONOMY_SAFEPOINT"): void {
    this.send(modeMsg(mode));
  }

  connect(): void {
    this.send(connectMsg());
  }

  disconnect(): void {
    this.send(disconnectMsg());
  }

  /** Arrow keys mirror the on-screen buttons; releasing stops the robot. */
  keydown(key: string): boolean {
    switch (key) {
      case "ArrowUp":
        this.forward();
        return true;
      case "ArrowDown":
        this.backward();
        return true;
      case "ArrowLeft":
        this.turnLeft();
        return true;
      case "ArrowRight":
        this.turnRight();
        return true;
      case " ":
        this.stop();
        return true;
    }
    return false;
  }

  keyup(key: string): boolean {
    if (["ArrowUp", "ArrowDown", "ArrowLeft", "ArrowRight"].includes(key)) {
      this.stop();
      return true;
    }
    return false;
  }
}

const JOY_CENTER = 512;
const JOY_DEADZONE = 16;

/** Map a browser gamepad axis (-1..1) to a 10-bit count, center 512. */
export function axisToCount(axis: number): number {
  const count = Math.round(JOY_CENTER + axis * 511);
  return Math.max(0, Math.min(1023, count));
}

export function inDeadzone(count: number): boolean {
  return Math.abs(count - JOY_CENTER) <= JOY_DEADZONE;
}

/**
 * Polls gamepad axes at a fixed cadence and emits joystick messages.
 *
 * At center no traffic is sent (the deadzone is honored client-side as
 * well); one final centered message goes out when the stick returns to
 * rest so the robot actually stops.
 */
export class GamepadPoller {
  private lastSent = -Infinity;
  private wasActive = false;

  constructor(
    private send: SendFn,
    private readAxes: () => [number, number] | null,
    public periodMs = 100,
  ) {}

  poll(nowMs: number): boolean {
    if (nowMs - this.lastSent < this.periodMs) return false;
    const axes = this.readAxes();
    if (!axes) return false;
    const h = axisToCount(axes[0]);
    const v = axisToCount(-axes[1]); // browser pads report up as negative
    const centered = inDeadzone(h) && inDeadzone(v);
    if (centered && !this.wasActive) return false;
    this.send(joystickMsg([h, v]));
    this.lastSent = nowMs;
    this.wasActive = !centered;
    return true;
  }
}
