"""Kinematics, encoder emulation and PID loop tests.

The closed-form differential-drive arc is the oracle for the stepper, and
the stepper itself (noise-free) is the oracle for dead reckoning.
"""

import math

import pytest

from teleosim.geometry import Polygon, Pose2D, Twist, WorldModel, wrap_angle
from teleosim.world import (
    DriveParams,
    DriveTrain,
    EncoderReading,
    PidState,
    RobotState,
    dead_reckon,
    pid_step,
    slew_limit_twist,
    step_world,
)

PARAMS = DriveParams()  # wheel radius 0.1, base 0.4, 500 ticks/rev


def run_trace(world, state, commands, dt=0.01):
    """Apply a list of (vl, vr) wheel speeds; collect encoder readings."""
    readings = []
    for vl, vr in commands:
        state, reading, collided = step_world(world, state, (vl, vr), dt, PARAMS)
        readings.append(reading)
        assert not collided
    return state, readings


class TestStepWorld:
    def test_zero_speed_identity(self, open_world):
        state = RobotState(pose=Pose2D(1.0, 2.0, 0.5))
        new, reading, collided = step_world(open_world, state, (0.0, 0.0), 0.01, PARAMS)
        assert new.pose == state.pose
        assert reading == EncoderReading(0, 0)
        assert not collided

    def test_zero_dt_identity(self, open_world):
        state = RobotState(pose=Pose2D(1.0, 2.0, 0.5))
        new, reading, collided = step_world(open_world, state, (1.0, 1.0), 0.0, PARAMS)
        assert new is state and reading == EncoderReading(0, 0) and not collided

    def test_full_revolution_forward(self, open_world):
        # both wheels one revolution: straight travel of the circumference
        circumference = 2.0 * math.pi * PARAMS.wheel_radius
        state = RobotState(pose=Pose2D(0.0, 0.0, 0.0))
        new, reading, _ = step_world(open_world, state, (circumference, circumference), 1.0, PARAMS)
        assert reading == EncoderReading(500, 500)
        assert new.pose.x == pytest.approx(circumference, abs=1e-12)
        assert new.pose.y == pytest.approx(0.0, abs=1e-12)
        assert new.pose.theta == 0.0

    def test_spin_in_place(self, open_world):
        # equal and opposite travel d rotates by 2d/base without translation
        d = 100 * PARAMS.meters_per_tick
        state = RobotState(pose=Pose2D(2.0, -1.0, 0.3))
        new, reading, _ = step_world(open_world, state, (-d, d), 1.0, PARAMS)
        assert (reading.left_ticks, reading.right_ticks) == (-100, 100)
        assert new.pose.x == pytest.approx(2.0, abs=1e-12)
        assert new.pose.y == pytest.approx(-1.0, abs=1e-12)
        assert new.pose.theta == pytest.approx(wrap_angle(0.3 + 2 * d / PARAMS.wheel_base), abs=1e-12)

    def test_encoder_magnitude_bound(self, open_world, rng):
        v_max, dt = 1.5, 0.01
        bound = v_max * dt / PARAMS.meters_per_tick + 1
        state = RobotState(pose=Pose2D(0.0, 0.0, 0.0))
        for _ in range(500):
            vl, vr = rng.uniform(-v_max, v_max, 2)
            state, reading, _ = step_world(open_world, state, (vl, vr), dt, PARAMS)
            assert abs(reading.left_ticks) <= bound
            assert abs(reading.right_ticks) <= bound

    def test_determinism(self, open_world, rng):
        commands = [tuple(rng.uniform(-1.5, 1.5, 2)) for _ in range(300)]
        end1, readings1 = run_trace(open_world, RobotState(pose=Pose2D(0, 0, 0)), commands)
        end2, readings2 = run_trace(open_world, RobotState(pose=Pose2D(0, 0, 0)), commands)
        assert end1 == end2
        assert readings1 == readings2

    def test_theta_always_normalized(self, open_world, rng):
        state = RobotState(pose=Pose2D(0.0, 0.0, 0.0))
        for _ in range(400):
            vl, vr = rng.uniform(-1.5, 1.5, 2)
            state, _, _ = step_world(open_world, state, (vl, vr), 0.01, PARAMS)
            assert -math.pi < state.pose.theta <= math.pi


class TestCollision:
    def test_stops_at_wall(self):
        world = WorldModel(
            bounds=(-5.0, -5.0, 5.0, 5.0),
            obstacles=(Polygon(((1.0, -2.0), (2.0, -2.0), (2.0, 2.0), (1.0, 2.0))),),
        )
        state = RobotState(pose=Pose2D(0.0, 0.0, 0.0))
        hit = False
        for _ in range(1000):
            state, reading, collided = step_world(world, state, (1.0, 1.0), 0.01, PARAMS)
            if collided:
                hit = True
                assert reading == EncoderReading(0, 0)
                assert state.wheel_vel == (0.0, 0.0)
                break
        assert hit
        # body circle (r=0.3) never enters the obstacle face at x=1
        assert state.pose.x <= 1.0 - 0.3 + 1e-9
        assert not world.body_collides(state.pose.x, state.pose.y, 0.3)

    def test_never_overlaps_obstacle(self, rng):
        world = WorldModel(
            bounds=(-5.0, -5.0, 5.0, 5.0),
            obstacles=(Polygon(((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0))),),
            safe_point=Pose2D(-4.0, -4.0, 0.0),
            start=Pose2D(-3.0, -3.0, 0.0),
        )
        state = RobotState(pose=world.start)
        for _ in range(2000):
            vl, vr = rng.uniform(-1.5, 1.5, 2)
            state, _, _ = step_world(world, state, (vl, vr), 0.01, PARAMS)
            assert not world.body_collides(state.pose.x, state.pose.y, 0.3 - 1e-9)


class TestDeadReckon:
    def test_identity(self):
        pose = Pose2D(1.0, 2.0, 0.7)
        assert dead_reckon(pose, EncoderReading(0, 0), PARAMS) == pose

    def test_full_revolution(self):
        pose = dead_reckon(Pose2D(0, 0, 0), EncoderReading(500, 500), PARAMS)
        assert pose.x == pytest.approx(2 * math.pi * 0.1, abs=1e-12)
        assert pose.y == 0.0 and pose.theta == 0.0

    def test_closed_square_round_trip(self, open_world):
        # drive a square: 4 x (straight, quarter turn); reckoning must land
        # exactly on the simulated pose (noise-free encoders)
        state = RobotState(pose=Pose2D(0.0, 0.0, 0.0))
        commands = []
        for _ in range(4):
            commands += [(0.8, 0.8)] * 250  # 2 m straight
            commands += [(-0.314159, 0.314159)] * 100  # ~quarter turn
        state, readings = run_trace(open_world, state, commands)
        reckoned = Pose2D(0.0, 0.0, 0.0)
        for reading in readings:
            reckoned = dead_reckon(reckoned, reading, PARAMS)
        assert reckoned == state.pose

    def test_random_traces_exact(self, open_world, rng):
        for _ in range(100):
            n = int(rng.integers(20, 120))
            commands = [tuple(rng.uniform(-1.5, 1.5, 2)) for _ in range(n)]
            start = Pose2D(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3))
            state, readings = run_trace(open_world, RobotState(pose=start), commands)
            reckoned = start
            for reading in readings:
                reckoned = dead_reckon(reckoned, reading, PARAMS)
            assert reckoned.x == pytest.approx(state.pose.x, abs=1e-9)
            assert reckoned.y == pytest.approx(state.pose.y, abs=1e-9)
            assert reckoned.theta == pytest.approx(state.pose.theta, abs=1e-9)


class TestPid:
    def test_zero_error_zero_output(self):
        u, _ = pid_step(1.0, 1.0, PidState(), 0.01)
        assert u == 0.0

    def test_pure_proportional(self):
        u, _ = pid_step(1.0, 0.5, PidState(kp=1.0, ki=0.0, kd=0.0), 0.01)
        assert u == pytest.approx(0.5)

    def test_integral_clamped(self):
        state = PidState(kp=0.0, ki=1.0, kd=0.0, integral_limit=0.5)
        for _ in range(1000):
            _, state = pid_step(10.0, 0.0, state, 0.01)
        assert state.integral == pytest.approx(0.5)

    def test_step_response_settles_within_two_seconds(self):
        # default gains on the wheel plant: |measured - target| < 1% in <= 2 s
        drive = DriveTrain(PARAMS)
        target = Twist(1.0, 0.0)
        wheel_vel = (0.0, 0.0)
        dt = 0.01
        settled_at = None
        for i in range(400):
            wheel_vel = drive.step(wheel_vel, target, dt)
            if settled_at is None and abs(wheel_vel[0] - 1.0) < 0.01 and abs(wheel_vel[1] - 1.0) < 0.01:
                settled_at = (i + 1) * dt
        assert settled_at is not None and settled_at <= 2.0
        # and it stays settled
        for _ in range(100):
            wheel_vel = drive.step(wheel_vel, target, dt)
        assert abs(wheel_vel[0] - 1.0) < 0.01

    def test_dt_must_be_positive(self):
        with pytest.raises(ValueError):
            pid_step(1.0, 0.0, PidState(), 0.0)


class TestSlewLimit:
    def test_clamps_rate(self):
        out = slew_limit_twist(Twist(0.0, 0.0), Twist(1.0, 1.0), 0.01, accel=1.0, ang_accel=2.0)
        assert out.v == pytest.approx(0.01)
        assert out.w == pytest.approx(0.02)

    def test_reaches_target(self):
        cur = Twist(0.0, 0.0)
        for _ in range(200):
            cur = slew_limit_twist(cur, Twist(0.5, -0.3), 0.01)
        assert cur.v == pytest.approx(0.5) and cur.w == pytest.approx(-0.3)
