"""Differential-drive robot physics: fixed-step integration, encoder
emulation and PID wheel-velocity loops.

The simulated pose advances by the tick-quantized wheel travel (fractional
ticks are carried to the next step), so noise-free dead reckoning over the
emitted encoder counts reproduces the simulated pose exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import Pose2D, Twist, WorldModel, wrap_angle

V_MAX_DEFAULT = 1.5  # m/s, top commanded speed
W_MAX_DEFAULT = 1.0  # rad/s
BODY_RADIUS_DEFAULT = 0.3  # m, conservative circular footprint
PHYSICS_DT_MS = 10  # fixed physics tick

# floor() guard so an exact whole-tick travel is not lost to float rounding
_TICK_EPS = 1e-9


@dataclass(frozen=True)
class DriveParams:
    """Wheel geometry and encoder resolution."""

    wheel_radius: float = 0.1
    wheel_base: float = 0.4
    ticks_per_rev: int = 500

    def __post_init__(self) -> None:
        if self.wheel_radius <= 0 or self.wheel_base <= 0 or self.ticks_per_rev <= 0:
            raise ValueError("drive parameters must be strictly positive")

    @property
    def meters_per_tick(self) -> float:
        return 2.0 * math.pi * self.wheel_radius / self.ticks_per_rev


@dataclass(frozen=True)
class EncoderReading:
    """Signed tick counts accumulated since the previous step."""

    left_ticks: int
    right_ticks: int


@dataclass(frozen=True)
class RobotState:
    """Immutable snapshot of the simulated robot."""

    pose: Pose2D
    wheel_vel: tuple[float, float] = (0.0, 0.0)  # (left, right) rim speed, m/s
    tick_carry: tuple[float, float] = (0.0, 0.0)  # fractional encoder remainders


def arc_advance(pose: Pose2D, d_left: float, d_right: float, wheel_base: float) -> Pose2D:
    """Exact differential-drive arc for the given per-wheel travel."""
    d = 0.5 * (d_left + d_right)
    dtheta = (d_right - d_left) / wheel_base
    if abs(dtheta) < 1e-12:
        return Pose2D(
            pose.x + d * math.cos(pose.theta),
            pose.y + d * math.sin(pose.theta),
            pose.theta,
        )
    radius = d / dtheta
    theta2 = pose.theta + dtheta
    return Pose2D(
        pose.x + radius * (math.sin(theta2) - math.sin(pose.theta)),
        pose.y + radius * (math.cos(pose.theta) - math.cos(theta2)),
        wrap_angle(theta2),
    )


def _emit_ticks(carry: float, travel_m: float, meters_per_tick: float) -> tuple[int, float]:
    acc = carry + travel_m / meters_per_tick
    ticks = math.floor(acc + _TICK_EPS)
    return ticks, acc - ticks


def step_world(
    world: WorldModel,
    state: RobotState,
    wheel_speeds: tuple[float, float],
    dt: float,
    params: DriveParams = DriveParams(),
    body_radius: float = BODY_RADIUS_DEFAULT,
) -> tuple[RobotState, EncoderReading, bool]:
    """Advance the robot one fixed tick at the given actual wheel rim speeds.

    Returns the new state, the encoder ticks emitted for the step and a
    collision flag. On collision the robot is stopped at the pre-step pose
    (contact resolved at tick resolution) and no ticks are emitted.
    """
    if dt == 0.0:
        return state, EncoderReading(0, 0), False
    vl, vr = wheel_speeds
    ticks_l, carry_l = _emit_ticks(state.tick_carry[0], vl * dt, params.meters_per_tick)
    ticks_r, carry_r = _emit_ticks(state.tick_carry[1], vr * dt, params.meters_per_tick)
    d_left = ticks_l * params.meters_per_tick
    d_right = ticks_r * params.meters_per_tick
    pose2 = arc_advance(state.pose, d_left, d_right, params.wheel_base)
    if world.body_collides(pose2.x, pose2.y, body_radius):
        stopped = replace(state, wheel_vel=(0.0, 0.0))
        return stopped, EncoderReading(0, 0), True
    new_state = RobotState(pose=pose2, wheel_vel=(vl, vr), tick_carry=(carry_l, carry_r))
    return new_state, EncoderReading(ticks_l, ticks_r), False


def dead_reckon(pose: Pose2D, reading: EncoderReading, params: DriveParams = DriveParams()) -> Pose2D:
    """Integrate one encoder reading into a pose estimate (arc model)."""
    return arc_advance(
        pose,
        reading.left_ticks * params.meters_per_tick,
        reading.right_ticks * params.meters_per_tick,
        params.wheel_base,
    )


@dataclass(frozen=True)
class PidState:
    """Positional PID with clamped integral."""

    kp: float = 6.0
    ki: float = 2.0
    kd: float = 0.0
    integral: float = 0.0
    prev_error: float | None = None
    integral_limit: float = 0.5


def pid_step(
    target: float,
    measured: float,
    state: PidState,
    dt: float,
    out_limit: float = math.inf,
) -> tuple[float, PidState]:
    """One PID update; returns (actuation, new state).

    Actuation is saturated to +/- out_limit. Anti-windup is twofold: the
    integral is clamped to its bound, and it stops accumulating while the
    output is saturated in the error's direction.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    error = target - measured
    integral = state.integral + error * dt
    integral = min(max(integral, -state.integral_limit), state.integral_limit)
    derivative = 0.0 if state.prev_error is None else (error - state.prev_error) / dt
    u = state.kp * error + state.ki * integral + state.kd * derivative
    if u > out_limit:
        u = out_limit
        if error > 0:
            integral = state.integral
    elif u < -out_limit:
        u = -out_limit
        if error < 0:
            integral = state.integral
    return u, replace(state, integral=integral, prev_error=error)


class DriveTrain:
    """Per-wheel PID velocity loops over a first-order motor model.

    The PID output is the wheel rim acceleration command, saturated at
    ``motor_accel_limit``; wheel speed integrates it each tick.
    """

    def __init__(
        self,
        params: DriveParams = DriveParams(),
        kp: float = 6.0,
        ki: float = 2.0,
        kd: float = 0.0,
        motor_accel_limit: float = 2.0,
    ):
        self.params = params
        self.motor_accel_limit = motor_accel_limit
        self.pid_left = PidState(kp=kp, ki=ki, kd=kd)
        self.pid_right = PidState(kp=kp, ki=ki, kd=kd)

    def wheel_targets(self, twist: Twist) -> tuple[float, float]:
        half = 0.5 * self.params.wheel_base
        return twist.v - twist.w * half, twist.v + twist.w * half

    def step(self, wheel_vel: tuple[float, float], twist: Twist, dt: float) -> tuple[float, float]:
        """Return the wheel speeds after one PID/motor update toward the twist."""
        tl, tr = self.wheel_targets(twist)
        ul, self.pid_left = pid_step(tl, wheel_vel[0], self.pid_left, dt, self.motor_accel_limit)
        ur, self.pid_right = pid_step(tr, wheel_vel[1], self.pid_right, dt, self.motor_accel_limit)
        return wheel_vel[0] + ul * dt, wheel_vel[1] + ur * dt

    def reset(self) -> None:
        self.pid_left = replace(self.pid_left, integral=0.0, prev_error=None)
        self.pid_right = replace(self.pid_right, integral=0.0, prev_error=None)


def slew_limit_twist(
    current: Twist,
    target: Twist,
    dt: float,
    accel: float = 1.0,
    ang_accel: float = 2.0,
    brake: float | None = None,
) -> Twist:
    """Rate-limit commanded twist changes (the configured acceleration clamp).

    Reducing |v| (braking) may use the larger `brake` rate, matching the
    motors' full authority; speeding up stays on the comfort clamp.
    """
    brake = accel if brake is None else brake
    rate_down = brake if abs(target.v) < abs(current.v) else accel
    dv = min(max(target.v - current.v, -rate_down * dt), rate_down * dt)
    dw = min(max(target.w - current.w, -ang_accel * dt), ang_accel * dt)
    return Twist(current.v + dv, current.w + dw)
