"""Operator-side core: channel handling, the virtual represent (occupancy
grid, pose arrow, trajectory), network estimation, command sending,
joystick mapping and path recording.

The client never extrapolates the robot pose: everything it shows comes
from decoded telemetry, applied freshest-wins on the 100 ms render tick.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .clock import Scheduler
from .sensors import LASER_FOV_DEG, SONAR_ANGLES_DEG
from .wire import (
    ChannelClass,
    CommandKind,
    CommandMessage,
    DecodeError,
    LatestBuffer,
    TelemetryFrame,
    decode_command,
    decode_telemetry,
    encode_command,
    unpack_media,
)

UNKNOWN, FREE, OCCUPIED = 0, 1, 2

JOY_CENTER = 512
JOY_DEADZONE = 16
JOY_MAX = 1023


class NotConnectedError(RuntimeError):
    pass


def _axis_unit(axis: int) -> float:
    """10-bit axis count to [-1, 1] with a deadzone around center."""
    if axis > JOY_CENTER + JOY_DEADZONE:
        return (axis - JOY_CENTER - JOY_DEADZONE) / (JOY_MAX - JOY_CENTER - JOY_DEADZONE)
    if axis < JOY_CENTER - JOY_DEADZONE:
        return max((axis - JOY_CENTER + JOY_DEADZONE) / (JOY_MAX - JOY_CENTER - JOY_DEADZONE), -1.0)
    return 0.0


def map_joystick(
    axes: tuple[int, int], v_limit: float, w_max: float
) -> tuple[float, float]:
    """(horizontal, vertical) axes to (v, w).

    Vertical drives forward speed in [-v_limit, +v_limit]; horizontal
    steers, pushing right turning clockwise (negative w).
    """
    horizontal, vertical = axes
    v = v_limit * _axis_unit(vertical)
    w = -w_max * _axis_unit(horizontal)
    return v, w


class OccupancyGrid:
    """World-aligned occupancy grid (UNKNOWN / FREE / OCCUPIED)."""

    def __init__(self, bounds: tuple[float, float, float, float], resolution: float = 0.1):
        self.bounds = bounds
        self.resolution = resolution
        xmin, ymin, xmax, ymax = bounds
        self.cols = max(int(math.ceil((xmax - xmin) / resolution)), 1)
        self.rows = max(int(math.ceil((ymax - ymin) / resolution)), 1)
        self.cells = np.zeros((self.rows, self.cols), dtype=np.uint8)
        self._changed: dict[tuple[int, int], int] = {}

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        xmin, ymin, _, _ = self.bounds
        c = int((x - xmin) / self.resolution)
        r = int((y - ymin) / self.resolution)
        if 0 <= r < self.rows and 0 <= c < self.cols:
            return r, c
        return None

    def _set(self, r: int, c: int, value: int) -> None:
        if self.cells[r, c] != value:
            self.cells[r, c] = value
            self._changed[(r, c)] = value

    def mark_free_line(self, x0: float, y0: float, x1: float, y1: float) -> None:
        """Mark cells along the segment FREE (endpoint cell excluded)."""
        dist = math.hypot(x1 - x0, y1 - y0)
        if dist <= 0.0:
            return
        n = max(int(dist / (self.resolution * 0.45)), 1)
        ts = np.linspace(0.0, 1.0, n + 1)[:-1]
        end_cell = self.cell_of(x1, y1)
        for t in ts:
            cell = self.cell_of(x0 + t * (x1 - x0), y0 + t * (y1 - y0))
            if cell is not None and cell != end_cell:
                self._set(cell[0], cell[1], FREE)

    def mark_occupied(self, x: float, y: float) -> None:
        cell = self.cell_of(x, y)
        if cell is not None:
            self._set(cell[0], cell[1], OCCUPIED)

    def take_changes(self) -> list[tuple[int, int, int]]:
        changes = [(r, c, v) for (r, c), v in self._changed.items()]
        self._changed.clear()
        return changes


@dataclass(frozen=True)
class NetworkEstimate:
    delay_ms: float
    jitter_ms: float
    link_state: str  # UP | DEGRADED | DOWN


class NetworkEstimator:
    """RTP-style smoothed round-trip delay and jitter.

    delay <- EWMA(alpha=0.125); jitter <- EWMA(alpha=0.25) of
    |sample - delay|. Link state derives from telemetry silence.
    """

    DELAY_ALPHA = 0.125
    JITTER_ALPHA = 0.25

    def __init__(self, down_after_ms: float = 600.0, degraded_after_ms: float = 300.0):
        self.delay_ms: float | None = None
        self.jitter_ms: float = 0.0
        self.down_after_ms = down_after_ms
        self.degraded_after_ms = degraded_after_ms
        self.samples = 0

    def add_sample(self, rtt_ms: float) -> None:
        self.samples += 1
        if self.delay_ms is None:
            self.delay_ms = rtt_ms
            self.jitter_ms = 0.0
            return
        deviation = abs(rtt_ms - self.delay_ms)
        self.delay_ms += self.DELAY_ALPHA * (rtt_ms - self.delay_ms)
        self.jitter_ms += self.JITTER_ALPHA * (deviation - self.jitter_ms)

    def snapshot(self, now_ms: float, last_telemetry_ms: float | None) -> NetworkEstimate:
        if last_telemetry_ms is None:
            state = "DOWN"
        else:
            silence = now_ms - last_telemetry_ms
            if silence > self.down_after_ms:
                state = "DOWN"
            elif silence > self.degraded_after_ms:
                state = "DEGRADED"
            else:
                state = "UP"
        return NetworkEstimate(
            delay_ms=self.delay_ms if self.delay_ms is not None else 0.0,
            jitter_ms=self.jitter_ms,
            link_state=state,
        )


class VirtualRepresent:
    """Operator-side world model rebuilt purely from telemetry."""

    def __init__(
        self,
        bounds: tuple[float, float, float, float],
        resolution: float = 0.1,
        sonar_mount_angles_deg: tuple[float, ...] = SONAR_ANGLES_DEG,
        sonar_mount_radius: float = 0.3,
        sonar_max_range: float = 4.0,
        laser_max_range: float = 80.0,
    ):
        self.grid = OccupancyGrid(bounds, resolution)
        self.pose: tuple[float, float, float] | None = None
        self.trajectory: list[tuple[int, float, float, float]] = []  # (stamp, x, y, theta)
        self.last_seq = -1
        self.sonar_mount_angles = tuple(math.radians(a) for a in sonar_mount_angles_deg)
        self.sonar_mount_radius = sonar_mount_radius
        self.sonar_max_range = sonar_max_range
        self.laser_max_range = laser_max_range

    def apply_frame(self, frame: TelemetryFrame) -> bool:
        """Integrate one decoded frame; stale (lower seq) frames are ignored."""
        if frame.seq <= self.last_seq:
            return False
        self.last_seq = frame.seq
        x, y, theta = frame.x, frame.y, frame.theta
        self.pose = (x, y, theta)
        self.trajectory.append((frame.stamp_ms, x, y, theta))
        free_lines: list[tuple[float, float, float, float]] = []
        hits: list[tuple[float, float]] = []
        for angle, rng in zip(self.sonar_mount_angles, frame.sonar):
            a = theta + angle
            ox = x + self.sonar_mount_radius * math.cos(a)
            oy = y + self.sonar_mount_radius * math.sin(a)
            dist = self.sonar_max_range if math.isinf(rng) else rng
            ex, ey = ox + dist * math.cos(a), oy + dist * math.sin(a)
            free_lines.append((ox, oy, ex, ey))
            if not math.isinf(rng):
                hits.append((ex, ey))
        n = len(frame.laser)
        for i, rng in enumerate(frame.laser):
            rel = -LASER_FOV_DEG / 2.0 + i * (LASER_FOV_DEG / (n - 1))
            a = theta + math.radians(rel)
            dist = self.laser_max_range if math.isinf(rng) else rng
            ex, ey = x + dist * math.cos(a), y + dist * math.sin(a)
            free_lines.append((x, y, ex, ey))
            if not math.isinf(rng):
                hits.append((ex, ey))
        # free pass first, then occupied endpoints, so a cell hit by this
        # scan is never left FREE in the same snapshot
        for x0, y0, x1, y1 in free_lines:
            self.grid.mark_free_line(x0, y0, x1, y1)
        for ex, ey in hits:
            self.grid.mark_occupied(ex, ey)
        return True


@dataclass
class ClientConfig:
    token: str = "mssr-secret"
    heartbeat_period_ms: float = 500.0
    render_period_ms: float = 100.0
    telemetry_period_ms: float = 200.0  # server cadence, for latency accounting
    grid_resolution: float = 0.1
    world_bounds: tuple[float, float, float, float] = (-50.0, -50.0, 50.0, 50.0)
    v_limit_hint: float = 1.5  # local joystick preview; the server clamp is authoritative
    w_max: float = 1.0


class TeleopClient:
    def __init__(self, scheduler: Scheduler, transport: Any, config: ClientConfig = ClientConfig()):
        self.scheduler = scheduler
        self.transport = transport
        self.config = config
        self.connected = False
        self.session_id: int | None = None
        self.role: str | None = None
        self.server_mode = "MANUAL"
        self.represent = VirtualRepresent(config.world_bounds, config.grid_resolution)
        self.estimator = NetworkEstimator(
            down_after_ms=3 * config.telemetry_period_ms,
            degraded_after_ms=1.5 * config.telemetry_period_ms,
        )
        self.telemetry_buffer = LatestBuffer()
        self.last_telemetry_at: float | None = None
        self.latest_frame: tuple[int, int, bytes] | None = None  # (seq, stamp, payload)
        self.media_latencies: list[float] = []
        self.arrivals: list[tuple[float, TelemetryFrame]] = []  # (arrival_ms, frame)
        self.applied: list[tuple[float, TelemetryFrame]] = []  # (render_ms, frame)
        self.command_echo: list[dict[str, Any]] = []
        self.decode_errors = 0
        self._snapshot_listeners: list[Callable[[dict], None]] = []
        self._frame_listeners: list[Callable[[int, int, bytes], None]] = []
        self._status_listeners: list[Callable[[dict], None]] = []
        self._tasks: list = []

    # ------------------------------------------------------------- lifecycle

    def connect(self) -> None:
        msg = CommandMessage(kind=CommandKind.CONNECT, token=self.config.token)
        self.transport.send(ChannelClass.ADMIN_COMMAND, encode_command(msg))

    def disconnect(self) -> None:
        if self.connected:
            self._send_admin(CommandMessage(kind=CommandKind.DISCONNECT))
            self.connected = False
        for t in self._tasks:
            t.cancel()
        self._tasks = []

    def _start_periodic(self) -> None:
        s = self.scheduler
        self._tasks = [
            s.every(self.config.heartbeat_period_ms, self._heartbeat_tick, first_at=s.now),
            s.every(self.config.render_period_ms, self._render_tick),
        ]

    # ------------------------------------------------------------ inbound IO

    def on_admin_bytes(self, payload: bytes) -> None:
        try:
            body = json.loads(payload.decode("ascii"))
        except (ValueError, UnicodeDecodeError):
            self.decode_errors += 1
            return
        kind = body.get("kind")
        if kind == "CONNECT_ACK" and body.get("ok"):
            self.connected = True
            self.session_id = body.get("session")
            self.role = body.get("role")
            if not self._tasks:
                self._start_periodic()
        elif kind == "MODE":
            self.server_mode = body.get("mode", self.server_mode)
            self._emit_status()
        elif kind == "ERROR":
            self.command_echo.append({"t": self.scheduler.now, "error": body.get("error")})

    def on_telemetry_bytes(self, payload: bytes) -> None:
        now = self.scheduler.now
        if payload.startswith(b"ACK"):
            try:
                msg = decode_command(payload[3:])
            except ValueError:
                self.decode_errors += 1
                return
            if msg.stamp_ms is not None:
                self.estimator.add_sample(now - msg.stamp_ms)
            return
        try:
            frame = decode_telemetry(payload)
        except DecodeError:
            self.decode_errors += 1
            return
        self.last_telemetry_at = now
        if self.telemetry_buffer.offer(frame.seq, frame):
            self.arrivals.append((now, frame))

    def on_media_bytes(self, payload: bytes) -> None:
        try:
            seq, stamp, body = unpack_media(payload)
        except DecodeError:
            self.decode_errors += 1
            return
        if self.latest_frame is None or seq > self.latest_frame[0]:
            self.latest_frame = (seq, stamp, body)
            self.media_latencies.append(self.scheduler.now - stamp)
            for cb in self._frame_listeners:
                cb(seq, stamp, body)

    # ---------------------------------------------------------------- ticks

    def _heartbeat_tick(self) -> None:
        est = self.estimator.snapshot(self.scheduler.now, self.last_telemetry_at)
        msg = CommandMessage(
            kind=CommandKind.HEARTBEAT,
            stamp_ms=int(self.scheduler.now),
            delay_ms=round(est.delay_ms, 3),
            jitter_ms=round(est.jitter_ms, 3),
        )
        self.transport.send(ChannelClass.TELEMETRY, encode_command(msg))

    def _render_tick(self) -> None:
        frame = self.telemetry_buffer.take_fresh()
        if frame is not None and self.represent.apply_frame(frame):
            self.applied.append((self.scheduler.now, frame))
        self._emit_snapshot(frame)
        self._emit_status()

    # ------------------------------------------------------------- commands

    def _send_admin(self, msg: CommandMessage) -> None:
        if not self.connected:
            raise NotConnectedError("client is not connected")
        self.transport.send(ChannelClass.ADMIN_COMMAND, encode_command(msg))
        echo = {"t": self.scheduler.now, "kind": msg.kind.value}
        self.command_echo.append(echo)

    def send_drive(self, v: float, w: float) -> None:
        self._send_admin(CommandMessage(kind=CommandKind.SET_TWIST, v=v, w=w))

    def send_stop(self) -> None:
        self._send_admin(CommandMessage(kind=CommandKind.STOP))

    def send_ptz(self, pan: float, tilt: float, zoom: float) -> None:
        self._send_admin(CommandMessage(kind=CommandKind.SET_PTZ, pan=pan, tilt=tilt, zoom=zoom))

    def send_mode(self, mode: str) -> None:
        self._send_admin(CommandMessage(kind=CommandKind.SET_MODE, mode=mode))

    def send_joystick(self, axes: tuple[int, int], buttons: int = 0) -> None:
        if not self.connected:
            raise NotConnectedError("client is not connected")
        msg = CommandMessage(kind=CommandKind.JOYSTICK_AXES, axes=axes, buttons=buttons)
        msg.validate()
        self.transport.send(ChannelClass.TELEMETRY, encode_command(msg))

    # ------------------------------------------------------------ reporting

    def add_snapshot_listener(self, cb: Callable[[dict], None]) -> None:
        self._snapshot_listeners.append(cb)

    def add_frame_listener(self, cb: Callable[[int, int, bytes], None]) -> None:
        self._frame_listeners.append(cb)

    def add_status_listener(self, cb: Callable[[dict], None]) -> None:
        self._status_listeners.append(cb)

    def _emit_snapshot(self, frame: TelemetryFrame | None) -> None:
        if not self._snapshot_listeners:
            return
        rep = self.represent
        snap = {
            "t": self.scheduler.now,
            "pose": rep.pose,
            "trajectory_tail": rep.trajectory[-50:],
            "grid_changes": rep.grid.take_changes(),
            "grid_shape": (rep.grid.rows, rep.grid.cols),
            "resolution": rep.grid.resolution,
            "origin": rep.grid.bounds[:2],
            "telemetry": None if frame is None else frame,
        }
        for cb in self._snapshot_listeners:
            cb(snap)

    def _emit_status(self) -> None:
        if not self._status_listeners:
            return
        est = self.estimator.snapshot(self.scheduler.now, self.last_telemetry_at)
        status = {
            "t": self.scheduler.now,
            "delay_ms": est.delay_ms,
            "jitter_ms": est.jitter_ms,
            "link": est.link_state,
            "mode": self.server_mode,
            "connected": self.connected,
        }
        for cb in self._status_listeners:
            cb(status)

    def network_estimate(self) -> NetworkEstimate:
        return self.estimator.snapshot(self.scheduler.now, self.last_telemetry_at)

    def display_latency_report(self) -> dict[str, float]:
        """Sample-to-render pipeline budget on the virtual clock.

        A world change right after a sample waits a full sampling period
        for the next frame, rides the network, then waits up to a render
        period; the budget charges both full periods plus the measured
        mean transit, which is how the end-to-end display latency of the
        virtual represent is quoted.
        """
        transits = [arrival - frame.stamp_ms for arrival, frame in self.arrivals]
        mean_transit = sum(transits) / len(transits) if transits else 0.0
        return {
            "frames": len(transits),
            "mean_transit_ms": mean_transit,
            "sample_to_render_ms": (
                self.config.telemetry_period_ms + mean_transit + self.config.render_period_ms
            ),
        }


@dataclass(frozen=True)
class PathReport:
    samples: int
    max_dx: float
    max_dy: float
    mean_abs_error: float
    mean_along_track: float
    mean_transit_ms: float
    predicted_along_track: float  # v * mean transit (lag model)

    def deviation_within(self, limit_m: float) -> bool:
        return max(self.max_dx, self.max_dy) <= limit_m


def _interp_truth(pose_log: list[tuple[float, float, float, float]], t: float) -> tuple[float, float, float]:
    """Linear interpolation of the ground-truth pose log at time t."""
    times = [p[0] for p in pose_log]
    import bisect

    i = bisect.bisect_left(times, t)
    if i <= 0:
        _, x, y, th = pose_log[0]
        return x, y, th
    if i >= len(pose_log):
        _, x, y, th = pose_log[-1]
        return x, y, th
    t0, x0, y0, th0 = pose_log[i - 1]
    t1, x1, y1, th1 = pose_log[i]
    if t1 <= t0:
        return x1, y1, th1
    a = (t - t0) / (t1 - t0)
    return x0 + a * (x1 - x0), y0 + a * (y1 - y0), th0 + a * (th1 - th0)


def record_paths(
    pose_log: list[tuple[float, float, float, float]],
    arrivals: list[tuple[float, TelemetryFrame]],
    commanded_speed: float | None = None,
) -> PathReport:
    """Compare the remote (telemetry) path against local ground truth.

    At each fresh telemetry arrival, the newest information on the
    operator screen is the pose sampled one transit earlier; the deviation
    against the true pose at that moment is the lag-induced display error
    (the v*L model predicts its along-track component).
    """
    if not arrivals or not pose_log:
        raise ValueError("need at least one arrival and a truth log")
    dxs, dys, alongs, transits, abs_errs = [], [], [], [], []
    for arrival_t, frame in arrivals:
        tx, ty, tth = _interp_truth(pose_log, arrival_t)
        dx = tx - frame.x
        dy = ty - frame.y
        dxs.append(abs(dx))
        dys.append(abs(dy))
        abs_errs.append(math.hypot(dx, dy))
        alongs.append(dx * math.cos(tth) + dy * math.sin(tth))
        transits.append(arrival_t - frame.stamp_ms)
    mean_transit = sum(transits) / len(transits)
    speed = commanded_speed if commanded_speed is not None else 0.0
    return PathReport(
        samples=len(arrivals),
        max_dx=max(dxs),
        max_dy=max(dys),
        mean_abs_error=sum(abs_errs) / len(abs_errs),
        mean_along_track=sum(alongs) / len(alongs),
        mean_transit_ms=mean_transit,
        predicted_along_track=speed * mean_transit / 1000.0,
    )


def paths_to_csv(
    pose_log: list[tuple[float, float, float, float]],
    arrivals: list[tuple[float, TelemetryFrame]],
    path: str,
) -> None:
    """Write both paths as CSV rows: source,t_ms,x,y."""
    import csv

    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "t_ms", "x", "y"])
        for t, x, y, _ in pose_log:
            writer.writerow(["local", f"{t:.1f}", f"{x:.4f}", f"{y:.4f}"])
        for t, frame in arrivals:
            writer.writerow(["remote", f"{t:.1f}", f"{frame.x:.4f}", f"{frame.y:.4f}"])
