"""Central server: owns the simulated robot, validates operator sessions,
dispatches commands, publishes telemetry/frames periodically, runs the
heartbeat watchdog and switches between manual and autonomous modes.

All periodic work is driven by a Scheduler, so the same code runs on the
virtual clock in tests and on the wall clock in live mode. One control
session at a time; later authenticated sessions are observers.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .clock import Scheduler
from .controllers import (
    AdaptiveSpeedController,
    NetworkCondition,
    ObstacleAvoidanceController,
    SafePointController,
)
from .geometry import Twist, WorldModel, wrap_angle
from .sensors import (
    BatteryModel,
    Camera,
    CompassConvention,
    PtzState,
    SonarRig,
    cast_laser,
    cast_sonar,
    read_compass,
    read_gps,
)
from .wire import (
    ChannelClass,
    CommandKind,
    CommandMessage,
    EncodeError,
    TelemetryFrame,
    decode_command,
    encode_command,
    encode_telemetry,
    pack_media,
    subsample_laser,
)
from .world import (
    BODY_RADIUS_DEFAULT,
    DriveParams,
    DriveTrain,
    RobotState,
    dead_reckon,
    slew_limit_twist,
    step_world,
)

log = logging.getLogger(__name__)


class Mode(Enum):
    MANUAL = "MANUAL"
    ASSISTED = "ASSISTED"
    AUTONOMY_SAFEPOINT = "AUTONOMY_SAFEPOINT"


@dataclass(frozen=True)
class WatchdogConfig:
    timeout_ms: float = 5000.0
    heartbeat_period_ms: float = 500.0

    def __post_init__(self) -> None:
        if not self.timeout_ms > 2 * self.heartbeat_period_ms:
            raise ValueError("watchdog timeout must exceed twice the heartbeat period")


@dataclass
class ServerConfig:
    token: str = "mssr-secret"
    v_max: float = 1.5
    w_max: float = 1.0
    accel_limit: float = 1.0  # commanded-twist slew clamp, m/s^2 (not from hardware data)
    brake_limit: float = 2.0  # braking may use the motors' full authority
    ang_accel_limit: float = 2.0
    physics_dt_ms: float = 10.0
    telemetry_period_ms: float = 200.0
    frame_period_ms: float = 100.0
    sonar_period_ms: float = 20.0
    controller_period_ms: float = 50.0
    laser_resolution_deg: float = 1.0
    body_radius: float = BODY_RADIUS_DEFAULT
    gps_origin: tuple[float, float] = (0.0, 0.0)
    gps_sigma_m: float = 2.0
    watchdog: WatchdogConfig = field(default_factory=WatchdogConfig)
    camera_mode: str = "first_person"
    # telemetry period stretches x2 when the smoothed RTT exceeds this;
    # far beyond normal operation so the 200 ms cadence contract holds
    rate_adapt_delay_ms: float = 1500.0
    seed: int = 0


@dataclass
class SessionState:
    session_id: int
    authenticated: bool = False
    controller: bool = False
    last_heartbeat_ms: float = -math.inf
    mode: Mode = Mode.MANUAL
    active_twist: Twist = Twist(0.0, 0.0)
    v_limit: float = 1.5


class EventLog:
    """Line-delimited structured event records for assertions and audits."""

    def __init__(self, scheduler: Scheduler):
        self._scheduler = scheduler
        self.records: list[dict[str, Any]] = []

    def emit(self, event: str, **data: Any) -> None:
        rec = {"t": self._scheduler.now, "event": event, **data}
        self.records.append(rec)
        log.debug("event %s", rec)

    def of(self, event: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["event"] == event]

    def to_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")


class Transport:
    """Where the server writes outbound bytes; live and virtual modes both
    implement this shape (duck-typed): send(channel, payload)."""

    def send(self, channel: ChannelClass, payload: bytes) -> None:  # pragma: no cover
        raise NotImplementedError


class TeleopServer:
    def __init__(
        self,
        world: WorldModel,
        scheduler: Scheduler,
        transport: Any,
        config: ServerConfig = ServerConfig(),
        drive_params: DriveParams = DriveParams(),
    ):
        self.world = world
        self.scheduler = scheduler
        self.transport = transport
        self.config = config
        self.params = drive_params
        self.events = EventLog(scheduler)
        self.rng = np.random.default_rng([config.seed, 0xFEED])

        self.robot = RobotState(pose=world.start)
        self.reported_pose = world.start  # dead-reckoned from emitted ticks
        self.drive = DriveTrain(drive_params)
        self.effective_twist = Twist(0.0, 0.0)
        self.ptz = PtzState()
        self.camera = Camera(mode=config.camera_mode)
        self.battery = BatteryModel()
        self.sonar_rig = SonarRig(mount_radius=config.body_radius)
        self.compass_convention = CompassConvention()

        self.speed_adapt = AdaptiveSpeedController()
        self.avoidance = ObstacleAvoidanceController(
            v_max=config.v_max, w_max=config.w_max
        )
        self.safepoint = SafePointController(avoidance=self.avoidance)
        self._avoidance_rules_file: str | None = None

        self.sessions: dict[int, SessionState] = {}
        self.control: SessionState | None = None
        self._next_session_id = 1
        self.telemetry_seq = 0
        self.frame_seq = 0
        self._sonar = cast_sonar(world, self.robot.pose, self.sonar_rig)
        self._laser = cast_laser(world, self.robot.pose, config.laser_resolution_deg)
        self._controller_twist = Twist(0.0, 0.0)
        self._collision_latch = False
        self.collision_count = 0
        self.safepoint_arrived = False
        # assisted mode steers back to the operator's course after detours
        self._assist_heading_ref = world.start.theta
        self.assist_heading_gain = 0.8
        self.assist_heading_max = 0.4
        self._telemetry_stretch = 1
        self._telemetry_ticks = 0
        self.pose_log: list[tuple[float, float, float, float]] = []  # (t, x, y, theta)
        self._tasks: list = []
        self._started = False

    # ------------------------------------------------------------------ setup

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        cfg = self.config
        s = self.scheduler
        # at shared timestamps: physics first, then sensing, then publishers
        self._tasks = [
            s.every(cfg.physics_dt_ms, self._physics_tick, priority=0),
            s.every(cfg.sonar_period_ms, self._sensor_tick, priority=1),
            s.every(cfg.telemetry_period_ms, self._telemetry_tick, priority=2),
            s.every(cfg.frame_period_ms, self._frame_tick, priority=2),
        ]
        self.events.emit("server_started")

    def stop(self) -> None:
        for t in self._tasks:
            t.cancel()
        self._tasks = []
        self._started = False

    def set_avoidance_rules(self, rulebase) -> None:
        """Swap in an experimental avoidance rulebase (same variable names)."""
        self.avoidance = ObstacleAvoidanceController(
            v_max=self.config.v_max, w_max=self.config.w_max, rulebase=rulebase
        )
        self.safepoint = SafePointController(avoidance=self.avoidance)

    # ------------------------------------------------------------- inbound IO

    def on_admin_bytes(self, payload: bytes) -> None:
        try:
            msg = decode_command(payload)
        except ValueError as exc:
            self.events.emit("protocol_error", error=str(exc))
            self._reply({"kind": "ERROR", "error": f"malformed command: {exc}"})
            return
        self.handle_command(msg)

    def on_datagram_bytes(self, payload: bytes) -> None:
        try:
            msg = decode_command(payload)
        except ValueError as exc:
            self.events.emit("protocol_error", error=str(exc))
            return
        if msg.kind == CommandKind.HEARTBEAT:
            self._handle_heartbeat(msg)
        elif msg.kind == CommandKind.JOYSTICK_AXES:
            self._handle_joystick(msg)

    # -------------------------------------------------------------- commands

    def handle_command(self, msg: CommandMessage) -> None:
        kind = msg.kind
        if kind == CommandKind.CONNECT:
            self._handle_connect(msg)
            return
        session = self.control
        if session is None or not session.authenticated:
            self.events.emit("auth_error", kind=kind.value)
            self._reply({"kind": "ERROR", "error": "not authenticated"})
            return
        if kind == CommandKind.DISCONNECT:
            self._handle_disconnect(session)
            return
        if session.mode is Mode.AUTONOMY_SAFEPOINT:
            link_up = self._link_fresh(session)
            if kind == CommandKind.STOP and link_up:
                self._exit_autonomy(session, reason="operator stop after recovery")
                return
            self.events.emit("command_ignored_autonomy", kind=kind.value)
            return
        if kind == CommandKind.SET_TWIST:
            twist = Twist(msg.v, msg.w).clamped(session.v_limit, self.config.w_max)
            session.active_twist = twist
            self._assist_heading_ref = self.robot.pose.theta
            self.events.emit("set_twist", v=twist.v, w=twist.w)
        elif kind == CommandKind.STOP:
            session.active_twist = Twist(0.0, 0.0)
            self._assist_heading_ref = self.robot.pose.theta
            self.events.emit("stop")
        elif kind == CommandKind.SET_PTZ:
            self.ptz = PtzState(pan=msg.pan, tilt=msg.tilt, zoom=msg.zoom)
            self.events.emit("set_ptz", pan=self.ptz.pan, tilt=self.ptz.tilt, zoom=self.ptz.zoom)
        elif kind == CommandKind.SET_MODE:
            try:
                mode = Mode(msg.mode)
            except ValueError:
                self.events.emit("protocol_error", error=f"unknown mode {msg.mode!r}")
                self._reply({"kind": "ERROR", "error": f"unknown mode {msg.mode!r}"})
                return
            self._set_mode(session, mode, reason="operator")
        else:
            self.events.emit("protocol_error", error=f"{kind.value} not valid on admin channel")

    def _handle_connect(self, msg: CommandMessage) -> None:
        if msg.token != self.config.token:
            self.events.emit("auth_error", kind="CONNECT")
            self._reply({"kind": "CONNECT_ACK", "ok": False, "error": "bad token"})
            return
        session = SessionState(session_id=self._next_session_id, authenticated=True)
        self._next_session_id += 1
        self.sessions[session.session_id] = session
        if self.control is None:
            session.controller = True
            self.control = session
        role = "controller" if session.controller else "observer"
        self.events.emit("connect", session=session.session_id, role=role)
        self._reply(
            {"kind": "CONNECT_ACK", "ok": True, "session": session.session_id, "role": role}
        )

    def _handle_disconnect(self, session: SessionState) -> None:
        self.events.emit("disconnect", session=session.session_id)
        session.active_twist = Twist(0.0, 0.0)
        session.authenticated = False
        self.sessions.pop(session.session_id, None)
        if self.control is session:
            self.control = None

    def _handle_heartbeat(self, msg: CommandMessage) -> None:
        session = self.control
        if session is None:
            return
        session.last_heartbeat_ms = self.scheduler.now
        if msg.delay_ms is not None and msg.jitter_ms is not None:
            condition = NetworkCondition(max(msg.delay_ms, 0.0), max(msg.jitter_ms, 0.0))
            session.v_limit = self.speed_adapt.v_limit(condition)
            session.active_twist = session.active_twist.clamped(
                session.v_limit, self.config.w_max
            )
            self._telemetry_stretch = (
                2 if condition.delay_ms > self.config.rate_adapt_delay_ms else 1
            )
        # reflect the client's stamp so it can measure RTT without clock sync
        if msg.stamp_ms is not None:
            ack = CommandMessage(kind=CommandKind.HEARTBEAT, stamp_ms=msg.stamp_ms)
            self.transport.send(ChannelClass.TELEMETRY, b"ACK" + encode_command(ack))
        self.events.emit("heartbeat", stamp=msg.stamp_ms)

    def _handle_joystick(self, msg: CommandMessage) -> None:
        session = self.control
        if session is None or session.mode is Mode.AUTONOMY_SAFEPOINT:
            return
        from .client import map_joystick  # mapping shared with the operator side

        v, w = map_joystick(msg.axes, session.v_limit, self.config.w_max)
        session.active_twist = Twist(v, w)
        self._assist_heading_ref = self.robot.pose.theta

    def _reply(self, body: dict) -> None:
        self.transport.send(
            ChannelClass.ADMIN_COMMAND, json.dumps(body, separators=(",", ":")).encode("ascii")
        )

    # ------------------------------------------------------------ mode logic

    def _set_mode(self, session: SessionState, mode: Mode, reason: str) -> None:
        if session.mode is mode:
            return
        old = session.mode
        session.mode = mode
        session.active_twist = Twist(0.0, 0.0)
        self._controller_twist = Twist(0.0, 0.0)
        if mode is Mode.AUTONOMY_SAFEPOINT:
            self.safepoint_arrived = False
        self.events.emit("mode", old=old.value, new=mode.value, reason=reason)
        # keep the operator console honest about who is driving
        self._reply({"kind": "MODE", "mode": mode.value, "reason": reason})
        self._controller_update()

    def _exit_autonomy(self, session: SessionState, reason: str) -> None:
        self._set_mode(session, Mode.MANUAL, reason=reason)
        session.active_twist = Twist(0.0, 0.0)

    def _link_fresh(self, session: SessionState) -> bool:
        return (
            self.scheduler.now - session.last_heartbeat_ms
            <= self.config.watchdog.timeout_ms
        )

    def watchdog_tick(self) -> None:
        session = self.control
        if session is None or session.last_heartbeat_ms == -math.inf:
            return
        now = self.scheduler.now
        wd = self.config.watchdog
        if session.mode is not Mode.AUTONOMY_SAFEPOINT:
            if now - session.last_heartbeat_ms > wd.timeout_ms:
                self._set_mode(session, Mode.AUTONOMY_SAFEPOINT, reason="link interruption")
        else:
            if self._link_fresh(session) and self.safepoint_arrived:
                robot_idle = abs(self.effective_twist.v) < 1e-6 and (
                    abs(self.effective_twist.w) < 1e-6
                )
                if robot_idle:
                    self._exit_autonomy(session, reason="link recovered at safe point")

    # ---------------------------------------------------------------- control

    def _sensor_tick(self) -> None:
        self._sonar = cast_sonar(self.world, self.robot.pose, self.sonar_rig)

    def _controller_update(self) -> None:
        session = self.control
        if session is None:
            self._controller_twist = Twist(0.0, 0.0)
            return
        if session.mode is Mode.MANUAL:
            self._controller_twist = session.active_twist
        elif session.mode is Mode.ASSISTED:
            # the operator's commanded rotation moves the course reference;
            # a bounded correction pulls back after avoidance detours
            err = wrap_angle(self._assist_heading_ref - self.robot.pose.theta)
            correction = min(
                max(self.assist_heading_gain * err, -self.assist_heading_max),
                self.assist_heading_max,
            )
            desired = Twist(session.active_twist.v, session.active_twist.w + correction)
            self._controller_twist = self.avoidance.adjust(self._sonar, desired)
        else:
            twist, arrived = self.safepoint.command(
                self.robot.pose, self.world.safe_point, self._sonar
            )
            if arrived and not self.safepoint_arrived:
                self.safepoint_arrived = True
                self.events.emit("safe_point_reached", x=self.robot.pose.x, y=self.robot.pose.y)
            self._controller_twist = twist

    def _physics_tick(self) -> None:
        cfg = self.config
        now = self.scheduler.now
        dt = cfg.physics_dt_ms / 1000.0
        self.watchdog_tick()
        if self.control is not None and self.control.mode is Mode.ASSISTED:
            self._assist_heading_ref = wrap_angle(
                self._assist_heading_ref + self.control.active_twist.w * dt
            )
        if (now % cfg.controller_period_ms) < cfg.physics_dt_ms - 1e-9:
            self._controller_update()
        session = self.control
        # safety overrides run every tick, whatever the controller cadence
        target = self._controller_twist
        if session is not None and session.mode is not Mode.MANUAL and target.v > 0.0:
            ranges = [4.0 if math.isinf(r) else r for r in self._sonar.ranges]
            front = min(ranges[0], ranges[1])
            side = min(ranges[2], ranges[3], ranges[4], ranges[5])
            if front <= self.avoidance.hard_stop_at or side <= self.avoidance.side_stop_distance:
                target = Twist(0.0, target.w)
        self.effective_twist = slew_limit_twist(
            self.effective_twist,
            target,
            dt,
            cfg.accel_limit,
            cfg.ang_accel_limit,
            brake=cfg.brake_limit,
        )
        wheel_speeds = self.drive.step(self.robot.wheel_vel, self.effective_twist, dt)
        self.robot, reading, collided = step_world(
            self.world, self.robot, wheel_speeds, dt, self.params, cfg.body_radius
        )
        self.reported_pose = dead_reckon(self.reported_pose, reading, self.params)
        if collided:
            if not self._collision_latch:
                self.collision_count += 1
                self.events.emit(
                    "collision", x=self.robot.pose.x, y=self.robot.pose.y,
                    mode=session.mode.value if session else None,
                )
            self._collision_latch = True
            self.effective_twist = Twist(0.0, 0.0)
        else:
            self._collision_latch = False
        pose = self.robot.pose
        self.pose_log.append((now, pose.x, pose.y, pose.theta))

    # ---------------------------------------------------------------- outputs

    def current_twist_measured(self) -> Twist:
        vl, vr = self.robot.wheel_vel
        return Twist(
            0.5 * (vl + vr), (vr - vl) / self.params.wheel_base
        )

    def build_telemetry_frame(self) -> TelemetryFrame:
        now = self.scheduler.now
        pose = self.reported_pose
        twist = self.current_twist_measured()
        self._laser = cast_laser(self.world, self.robot.pose, self.config.laser_resolution_deg)
        compass = read_compass(pose, self.compass_convention)
        gps = read_gps(pose, self.config.gps_origin, self.config.gps_sigma_m, self.rng)
        self.telemetry_seq += 1
        return TelemetryFrame(
            seq=self.telemetry_seq,
            stamp_ms=int(now),
            battery_v=self.battery.voltage(now),
            x=pose.x,
            y=pose.y,
            theta=pose.theta,
            v=twist.v,
            w=twist.w,
            compass_deg=compass.heading_deg,
            lat=gps.latitude,
            lon=gps.longitude,
            sonar=self._sonar.ranges,
            laser=subsample_laser(self._laser.ranges, self._laser.resolution_deg),
        ).quantized()

    def _telemetry_tick(self) -> None:
        if self.control is None:
            return
        # adaptive send rate: skip every other tick when stretched
        self._telemetry_ticks += 1
        if self._telemetry_stretch > 1 and (self._telemetry_ticks % self._telemetry_stretch):
            return
        frame = self.build_telemetry_frame()
        try:
            packet = encode_telemetry(frame)
        except EncodeError as exc:
            self.events.emit("telemetry_encode_error", error=str(exc))
            return
        self.transport.send(ChannelClass.TELEMETRY, packet)
        self.events.emit(
            "telemetry_sent", seq=frame.seq, bytes=len(packet),
            x=frame.x, y=frame.y, theta=frame.theta,
        )

    def _frame_tick(self) -> None:
        if self.control is None:
            return
        now = self.scheduler.now
        frame = self.camera.render(self.world, self.robot.pose, self.ptz, int(now))
        self.frame_seq += 1
        packet = pack_media(self.frame_seq, int(now), frame.pixels)
        self.transport.send(ChannelClass.MEDIA, packet)
