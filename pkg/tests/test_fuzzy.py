"""Fuzzy engine and controller tests.

The engine is checked against brute-force grid evaluation and a fine-grid
(1e6 point) integration oracle built independently in this file. The
controller outputs quoted as exact constants are regression values from
the shipped default rulebases.
"""

import numpy as np
import pytest

from teleosim.controllers import (
    AdaptiveSpeedController,
    NetworkCondition,
    ObstacleAvoidanceController,
    SafePointController,
    adapt_speed,
    avoid_obstacles,
    home_to_safe_point,
)
from teleosim.fuzzy import (
    GRID_POINTS,
    MembershipFunction,
    Rule,
    RuleBase,
    RuleBaseError,
    Variable,
    defuzzify_centroid,
    parse_rulebase,
    rulebase_to_text,
    trap,
    tri,
)
from teleosim.geometry import Pose2D, Twist
from teleosim.sensors import NO_ECHO, SonarArray

NE = NO_ECHO


# -------------------------------------------------------------- oracle


def mu_piecewise(points, x):
    """Independent membership evaluation (explicit piecewise linear)."""
    if len(points) == 3:
        a, b, c = points
        bl = br = b
    else:
        a, bl, br, c = points
    if x < a or x > c:
        return 0.0
    if x < bl:
        return (x - a) / (bl - a) if bl > a else 1.0
    if x <= br:
        return 1.0
    return (c - x) / (c - br) if c > br else 1.0


def fine_centroid(pieces, lo, hi, n=1_000_000):
    """Centroid of max-of-clipped-terms on an n-point grid (oracle)."""
    grid = np.linspace(lo, hi, n)
    agg = np.zeros(n)
    for points, clip in pieces:
        mu = np.array([mu_piecewise(points, x) for x in np.linspace(lo, hi, 2001)])
        mu = np.interp(grid, np.linspace(lo, hi, 2001), mu)
        agg = np.maximum(agg, np.minimum(mu, clip))
    area = np.trapezoid(agg, grid)
    if area < 1e-15:
        return None
    return float(np.trapezoid(agg * grid, grid) / area)


def simple_rulebase():
    x = Variable("x", 0.0, 10.0, {
        "low": trap("low", 0, 0, 2, 5),
        "high": trap("high", 2, 5, 10, 10),
    })
    out = Variable("out", 0.0, 4.0, {
        "small": tri("small", 0, 1, 2),
        "large": tri("large", 2, 3, 4),
    })
    rules = [
        Rule((("x", "low"),), (("out", "small"),)),
        Rule((("x", "high"),), (("out", "large"),)),
    ]
    return RuleBase([x], [out], rules)


class TestMembership:
    def test_triangle_values(self):
        mf = tri("t", 0.0, 1.0, 2.0)
        assert mf.mu(0.0) == 0.0
        assert mf.mu(1.0) == 1.0
        assert mf.mu(0.5) == pytest.approx(0.5)
        assert mf.mu(2.5) == 0.0

    def test_trapezoid_plateau(self):
        mf = trap("t", 0.0, 1.0, 3.0, 4.0)
        assert mf.mu(2.0) == 1.0
        assert mf.mu(3.5) == pytest.approx(0.5)

    def test_left_shoulder(self):
        mf = trap("t", 0.0, 0.0, 1.0, 2.0)
        assert mf.mu(0.0) == 1.0

    def test_descending_points_rejected(self):
        with pytest.raises(RuleBaseError):
            tri("bad", 2.0, 1.0, 3.0)

    def test_vectorized_matches_scalar(self, rng):
        mf = trap("t", -1.0, 0.5, 1.0, 3.0)
        xs = rng.uniform(-2, 4, 100)
        vec = mf.mu(xs)
        for x, v in zip(xs, vec):
            assert v == pytest.approx(mu_piecewise(mf.points, x), abs=1e-12)


class TestInfer:
    def test_full_activation_single_rule(self):
        rb = simple_rulebase()
        sets = rb.infer({"x": 0.0})  # low membership exactly 1
        out_grid = np.linspace(0, 4, GRID_POINTS)
        expected = rb.outputs["out"].terms["small"].mu(out_grid)
        np.testing.assert_allclose(sets["out"], expected)

    def test_zero_everywhere_when_nothing_fires(self):
        x = Variable("x", 0.0, 10.0, {
            "low": trap("low", 0, 0, 2, 5),
            "high": trap("high", 2, 5, 10, 10),
        })
        out = Variable("out", 0.0, 4.0, {"small": tri("small", 0, 1, 2)})
        rb = RuleBase([x], [out], [Rule((("x", "low"),), (("out", "small"),))])
        sets = rb.infer({"x": 10.0})  # low membership 0 here
        assert not sets["out"].any()

    def test_two_rules_grid_oracle(self):
        # activations 0.3 and 0.7 on overlapping consequents: compare with
        # a brute-force pointwise max of clipped terms on the same grid
        rb = simple_rulebase()
        crisp = 5.0 - 0.3 * 3.0  # low = 0.3 there
        sets = rb.infer({"x": 4.1})
        mu_low = mu_piecewise((0, 0, 2, 5), 4.1)
        mu_high = mu_piecewise((2, 5, 10, 10), 4.1)
        grid = np.linspace(0, 4, GRID_POINTS)
        expected = np.maximum(
            np.minimum([mu_piecewise((0, 1, 2), g) for g in grid], mu_low),
            np.minimum([mu_piecewise((2, 3, 4), g) for g in grid], mu_high),
        )
        np.testing.assert_allclose(sets["out"], expected, atol=1e-12)

    def test_inputs_clamped_to_universe(self):
        rb = simple_rulebase()
        np.testing.assert_allclose(rb.infer({"x": -5.0})["out"], rb.infer({"x": 0.0})["out"])

    def test_undeclared_variable_rejected(self):
        rb = simple_rulebase()
        with pytest.raises(RuleBaseError):
            rb.infer({"y": 1.0})

    def test_rule_referencing_unknown_term_rejected(self):
        x = Variable("x", 0, 1, {"a": tri("a", 0, 0.5, 1)})
        out = Variable("o", 0, 1, {"z": tri("z", 0, 0.5, 1)})
        with pytest.raises(RuleBaseError):
            RuleBase([x], [out], [Rule((("x", "nope"),), (("o", "z"),))])

    def test_coverage_gap_rejected(self):
        x = Variable("x", 0.0, 10.0, {
            "low": tri("low", 0, 1, 2),
            "high": tri("high", 8, 9, 10),  # gap between 2 and 8
        })
        out = Variable("o", 0, 1, {"z": tri("z", 0, 0.5, 1)})
        with pytest.raises(RuleBaseError):
            RuleBase([x], [out], [Rule((("x", "low"),), (("o", "z"),))])


class TestDefuzzify:
    def test_symmetric_triangle(self):
        grid = np.linspace(0, 4, GRID_POINTS)
        mu = tri("t", 1.0, 2.0, 3.0).mu(grid)
        assert defuzzify_centroid(mu, 0, 4) == pytest.approx(2.0, abs=1e-9)

    def test_uniform_set(self):
        mu = np.full(GRID_POINTS, 0.37)
        assert defuzzify_centroid(mu, 0, 4) == pytest.approx(2.0, abs=1e-9)

    def test_empty_set_fallback(self):
        assert defuzzify_centroid(np.zeros(GRID_POINTS), 0, 4, fallback=1.25) == 1.25

    def test_clipped_triangle_vs_fine_oracle(self):
        # triangle peaking at 2 over [0, 4], clipped at 0.5
        grid = np.linspace(0, 4, GRID_POINTS)
        mu = np.minimum(tri("t", 0.0, 2.0, 4.0).mu(grid), 0.5)
        got = defuzzify_centroid(mu, 0, 4)
        want = fine_centroid([((0.0, 2.0, 4.0), 0.5)], 0, 4)
        assert got == pytest.approx(want, abs=1e-4)

    def test_random_aggregates_vs_fine_oracle(self, rng):
        # universe spans and term widths as in actual output variables
        # (narrower-than-grid spikes would alias at 1000 points)
        for _ in range(30):
            lo, hi = 0.0, float(rng.uniform(1.0, 4.0))
            width = 0.25 * (hi - lo)
            pieces = []
            for _ in range(int(rng.integers(1, 4))):
                a = float(rng.uniform(lo - width, hi - width))
                b = a + float(rng.uniform(0.5, 1.0)) * width
                c = b + float(rng.uniform(0.5, 1.0)) * width
                clip = float(rng.uniform(0.2, 1.0))
                pieces.append(((a, b, c), clip))
            grid = np.linspace(lo, hi, GRID_POINTS)
            agg = np.zeros(GRID_POINTS)
            for points, clip in pieces:
                agg = np.maximum(agg, np.minimum(MembershipFunction("p", points).mu(grid), clip))
            got = defuzzify_centroid(agg, lo, hi)
            want = fine_centroid(pieces, lo, hi, n=1_000_000)
            assert want is not None
            assert got == pytest.approx(want, abs=1e-4)


class TestRulebaseText:
    def test_round_trip_behavior(self):
        rb = simple_rulebase()
        rb2 = parse_rulebase(rulebase_to_text(rb))
        for x in np.linspace(0, 10, 23):
            np.testing.assert_allclose(
                rb.infer({"x": float(x)})["out"], rb2.infer({"x": float(x)})["out"]
            )

    def test_parse_error_reports_line(self):
        with pytest.raises(RuleBaseError, match="line 2"):
            parse_rulebase("input x 0 1\nbogus directive\n")

    def test_rule_syntax_errors(self):
        with pytest.raises(RuleBaseError):
            parse_rulebase("input x 0 1\nterm x a tri 0 0.5 1\nrule x IS a THEN x IS a\n")


class TestAdaptSpeed:
    def test_perfect_network_full_speed(self):
        assert adapt_speed(NetworkCondition(0.0, 0.0)) == pytest.approx(1.5, abs=1e-12)

    def test_video_scale_delay_crawls(self):
        # regression constant from the shipped rulebase
        v = adapt_speed(NetworkCondition(2000.0, 0.0))
        assert v <= 0.3
        assert v == pytest.approx(0.28124968296034447, abs=1e-9)

    def test_table_midrange(self):
        v = adapt_speed(NetworkCondition(129.0, 30.0))
        assert 0.8 < v < 1.5
        assert v == pytest.approx(1.1147337294015804, abs=1e-9)

    def test_monotone_in_delay_and_jitter(self):
        ctrl = AdaptiveSpeedController()
        delays = np.linspace(0, 3000, 60)
        jitters = np.linspace(0, 500, 60)
        grid = np.array(
            [[ctrl.v_limit(NetworkCondition(d, j)) for j in jitters] for d in delays]
        )
        assert np.diff(grid, axis=0).max() <= 1e-12
        assert np.diff(grid, axis=1).max() <= 1e-12

    def test_output_bounds(self, rng):
        ctrl = AdaptiveSpeedController()
        for _ in range(200):
            v = ctrl.v_limit(NetworkCondition(rng.uniform(0, 5000), rng.uniform(0, 800)))
            assert 0.0 <= v <= 1.5

    def test_negative_condition_rejected(self):
        with pytest.raises(ValueError):
            NetworkCondition(-1.0, 0.0)


class TestAvoidObstacles:
    def test_clear_path_passthrough(self):
        out = avoid_obstacles(SonarArray((NE,) * 8), Twist(1.0, 0.1))
        assert out.v == pytest.approx(1.0, abs=0.02)
        assert out.w == pytest.approx(0.1, abs=1e-6)

    def test_hard_stop_inside_stop_distance(self):
        out = avoid_obstacles(SonarArray((0.2, NE, NE, NE, NE, NE, NE, NE)), Twist(1.0, 0.0))
        assert out.v == 0.0

    def test_left_obstacle_steers_right(self):
        # regression constant from the shipped rulebase
        out = avoid_obstacles(SonarArray((NE, NE, 0.5, NE, NE, NE, NE, NE)), Twist(0.5, 0.0))
        assert out.w < 0.0
        assert out.w == pytest.approx(-0.396341203557399, abs=1e-9)

    def test_right_obstacle_steers_left(self):
        out = avoid_obstacles(SonarArray((NE, NE, NE, NE, 0.5, NE, NE, NE)), Twist(0.5, 0.0))
        assert out.w > 0.0

    def test_hard_stop_property_all_inputs(self, rng):
        # crisp override: front range at or under stop distance always
        # zeroes forward speed, for any sonar array and forward command
        ctrl = ObstacleAvoidanceController()
        for _ in range(2000):
            front = rng.uniform(0.04, ctrl.stop_distance)
            ranges = [
                NE if rng.random() < 0.3 else float(rng.uniform(0.04, 4.0)) for _ in range(8)
            ]
            slot = int(rng.integers(0, 2))
            ranges[slot] = float(front)
            out = ctrl.adjust(SonarArray(tuple(ranges)), Twist(float(rng.uniform(0, 1.5)), float(rng.uniform(-1, 1))))
            assert out.v == 0.0

    def test_boundary_exactly_stop_distance(self):
        ctrl = ObstacleAvoidanceController()
        out = ctrl.adjust(SonarArray((0.3, NE, NE, NE, NE, NE, NE, NE)), Twist(1.0, 0.0))
        assert out.v == 0.0

    def test_speed_scales_down_with_clearance(self):
        ctrl = ObstacleAvoidanceController()
        v_far = ctrl.adjust(SonarArray((NE,) * 8), Twist(1.5, 0.0)).v
        v_mid = ctrl.adjust(SonarArray((1.5, NE, NE, NE, NE, NE, NE, NE)), Twist(1.5, 0.0)).v
        v_near = ctrl.adjust(SonarArray((0.6, NE, NE, NE, NE, NE, NE, NE)), Twist(1.5, 0.0)).v
        assert v_far > v_mid > v_near >= 0.0


class TestSafePoint:
    def test_arrival_zero_twist(self):
        twist = home_to_safe_point(Pose2D(0, 0, 0), Pose2D(0.05, 0.05, 0), SonarArray((NE,) * 8))
        assert twist == Twist(0.0, 0.0)

    def test_aligned_pursuit(self):
        twist = home_to_safe_point(Pose2D(0, 0, 0), Pose2D(2.0, 0.0, 0), SonarArray((NE,) * 8))
        assert twist.v > 0.0
        assert twist.w == pytest.approx(0.0, abs=1e-9)

    def test_ninety_left_near_max_turn(self):
        # regression constant from the shipped rulebase
        twist = home_to_safe_point(Pose2D(0, 0, 0), Pose2D(0.0, 2.0, 0), SonarArray((NE,) * 8))
        assert twist.w > 0.6
        assert twist.w == pytest.approx(0.8064352052814604, abs=1e-9)

    def test_ninety_right_mirrors(self):
        twist = home_to_safe_point(Pose2D(0, 0, 0), Pose2D(0.0, -2.0, 0), SonarArray((NE,) * 8))
        assert twist.w == pytest.approx(-0.8064352052814604, abs=1e-9)

    def test_converges_in_open_world(self, rng):
        # empirical convergence: from anywhere within 10 m, the kinematic
        # closed loop reaches the 0.1 m ball in under 60 simulated seconds
        from teleosim.geometry import WorldModel
        from teleosim.world import DriveParams, DriveTrain, RobotState, step_world

        world = WorldModel(bounds=(-50, -50, 50, 50))
        ctrl = SafePointController()
        params = DriveParams()
        for _ in range(10):
            start = Pose2D(rng.uniform(-7, 7), rng.uniform(-7, 7), rng.uniform(-3.1, 3.1))
            goal = Pose2D(rng.uniform(-7, 7), rng.uniform(-7, 7), 0.0)
            state = RobotState(pose=start)
            drive = DriveTrain(params)
            sonar = SonarArray((NE,) * 8)
            arrived = False
            twist = Twist(0.0, 0.0)
            for step in range(6000):  # 60 s at 10 ms
                if step % 5 == 0:
                    twist, arrived = ctrl.command(state.pose, goal, sonar)
                    if arrived:
                        break
                wheels = drive.step(state.wheel_vel, twist, 0.01)
                state, _, _ = step_world(world, state, wheels, 0.01, params)
            assert arrived, f"did not reach {goal} from {start}"
