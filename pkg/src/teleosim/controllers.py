"""The three fuzzy controllers: network-adaptive speed limiting, sonar
obstacle avoidance, and safe-point homing.

The shipped rulebases are this repo's defaults (documented below and
exportable to the rulebase text format); controller outputs quoted in the
tests are regression constants computed from these defaults.

Safety is layered: the fuzzy stage shapes speed and steering, a crisp
braking envelope caps speed so the robot can stop before the hard-stop
line, and a crisp override forces zero forward speed at or below it. The
override is a wrapper, not a fuzzy rule, so the stop invariant holds for
every input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .fuzzy import RuleBase, Rule, Variable, defuzzify_centroid, trap, tri
from .geometry import Pose2D, Twist, wrap_angle
from .sensors import SONAR_FRONT, SONAR_LEFT, SONAR_REAR, SONAR_RIGHT, SonarArray

V_LIMIT_MAX = 1.5


@dataclass(frozen=True)
class NetworkCondition:
    """Smoothed round-trip delay and delay jitter, milliseconds."""

    delay_ms: float
    jitter_ms: float

    def __post_init__(self) -> None:
        if self.delay_ms < 0 or self.jitter_ms < 0:
            raise ValueError("network condition values must be non-negative")


def _terms(var: Variable, *mfs) -> Variable:
    return Variable(var.name, var.lo, var.hi, {m.label: m for m in mfs})


def build_speed_adaptation_rules() -> RuleBase:
    """delay {small, medium, large} x jitter {small, large} -> speed limit.

    The table and term shapes make the defuzzified surface monotone under
    max aggregation, where naive two-input tables hump the centroid:

    - stop and medium are symmetric triangles inside the universe, so
      their clipped centroid is their center at any clip level; only fast
      is edge-clipped, and its activation is a single conjunction that
      cannot dip and recover;
    - jitter modulates only the small-delay row (fast vs medium), and the
      medium/large delay rows are single-antecedent rules, so no jitter
      pathway swells a middle lobe where the stop lobe dominates;
    - the medium-delay membership saturates before the small-delay one
      starts to fall, so the medium lobe never shrinks while a fast lobe
      is present (a shrinking lower lobe under a constant higher one is
      exactly what drags a centroid upward).
    """
    delay = _terms(
        Variable("delay", 0.0, 3000.0),
        trap("small", 0, 0, 300, 1100),
        trap("medium", 0, 300, 1500, 1900),
        trap("large", 1100, 1900, 3000, 3000),
    )
    jitter = _terms(
        Variable("jitter", 0.0, 500.0),
        trap("small", 0, 0, 20, 350),
        trap("large", 20, 350, 500, 500),
    )
    speed = _terms(
        Variable("speed", 0.0, V_LIMIT_MAX),
        tri("stop", 0.0, 0.25, 0.5),
        tri("medium", 0.25, 0.75, 1.25),
        tri("fast", 1.0, 1.5, 2.0),
    )
    rules = [
        Rule((("delay", "small"), ("jitter", "small")), (("speed", "fast"),)),
        Rule((("delay", "small"), ("jitter", "large")), (("speed", "medium"),)),
        Rule((("delay", "medium"),), (("speed", "medium"),)),
        Rule((("delay", "large"),), (("speed", "stop"),)),
    ]
    return RuleBase([delay, jitter], [speed], rules)


class AdaptiveSpeedController:
    """Maps the network condition to the commanded-speed ceiling.

    The defuzzified output is rescaled so a perfect network commands
    exactly the 1.5 m/s top speed (centroid defuzzification alone cannot
    reach the universe edge).
    """

    def __init__(self) -> None:
        self.rulebase = build_speed_adaptation_rules()
        self._out = self.rulebase.outputs["speed"]
        raw_best = self._raw(0.0, 0.0)
        self._scale = V_LIMIT_MAX / raw_best

    def _raw(self, delay_ms: float, jitter_ms: float) -> float:
        sets = self.rulebase.infer({"delay": delay_ms, "jitter": jitter_ms})
        return defuzzify_centroid(sets["speed"], self._out.lo, self._out.hi, fallback=0.0)

    def v_limit(self, condition: NetworkCondition) -> float:
        raw = self._raw(condition.delay_ms, condition.jitter_ms)
        return min(max(raw * self._scale, 0.0), V_LIMIT_MAX)


def build_avoidance_rules() -> RuleBase:
    """Clearances -> speed factor and steering bias.

    front is the lesser of the two bow sonars and drives speed; the bow
    sonars also enter separately (front_left at +10 deg, front_right at
    -10 deg) so an off-center blockage steers away from the nearer cone
    instead of cancelling out.
    """
    front = _terms(
        Variable("front", 0.0, 4.0),
        trap("near", 0, 0, 0.5, 1.2),
        tri("mid", 0.5, 1.2, 2.2),
        trap("far", 1.2, 2.2, 4, 4),
    )
    bow_terms = (trap("near", 0, 0, 0.5, 1.2), trap("far", 0.5, 1.2, 4, 4))
    front_left = _terms(Variable("front_left", 0.0, 4.0), *bow_terms)
    front_right = _terms(Variable("front_right", 0.0, 4.0), *bow_terms)
    side_terms = (trap("near", 0, 0, 0.4, 1.0), trap("far", 0.4, 1.0, 4, 4))
    left = _terms(Variable("left", 0.0, 4.0), *side_terms)
    right = _terms(Variable("right", 0.0, 4.0), *side_terms)
    speed = _terms(
        Variable("speed_factor", 0.0, 1.0),
        tri("stop", -0.5, 0.0, 0.5),
        tri("half", 0.0, 0.5, 1.0),
        tri("full", 0.5, 1.0, 1.5),
    )
    steer = _terms(
        Variable("steer", -1.0, 1.0),
        tri("hardright", -1.5, -1.0, -0.5),
        tri("right", -1.0, -0.5, 0.0),
        tri("zero", -0.5, 0.0, 0.5),
        tri("left", 0.0, 0.5, 1.0),
        tri("hardleft", 0.5, 1.0, 1.5),
    )
    rules = [
        Rule((("front", "far"),), (("speed_factor", "full"),)),
        Rule((("front", "mid"),), (("speed_factor", "half"),)),
        Rule((("front", "near"),), (("speed_factor", "stop"),)),
        Rule((("left", "near"), ("right", "far")), (("steer", "right"),)),
        Rule((("right", "near"), ("left", "far")), (("steer", "left"),)),
        Rule((("left", "near"), ("right", "near")), (("steer", "zero"),)),
        Rule((("front_right", "near"), ("front_left", "far")), (("steer", "left"),)),
        Rule((("front_left", "near"), ("front_right", "far")), (("steer", "right"),)),
        Rule(
            (("front", "far"), ("left", "far"), ("right", "far")),
            (("steer", "zero"),),
        ),
    ]
    return RuleBase([front, front_left, front_right, left, right], [speed, steer], rules)


def _clearance(sonar: SonarArray, indices: tuple[int, ...], cap: float = 4.0) -> float:
    r = sonar.min_of(indices)
    return cap if math.isinf(r) else min(r, cap)


class ObstacleAvoidanceController:
    def __init__(
        self,
        stop_distance: float = 0.3,
        brake_margin: float = 0.1,
        brake_decel: float = 1.0,
        side_stop_distance: float = 0.35,
        steer_gain: float = 1.0,
        v_max: float = 1.5,
        w_max: float = 1.0,
        rulebase: RuleBase | None = None,
    ):
        self.rulebase = rulebase if rulebase is not None else build_avoidance_rules()
        required_in = {"front", "front_left", "front_right", "left", "right"}
        required_out = {"speed_factor", "steer"}
        if not required_in <= set(self.rulebase.inputs) or not required_out <= set(
            self.rulebase.outputs
        ):
            raise ValueError(
                f"avoidance rulebase needs inputs {sorted(required_in)} "
                f"and outputs {sorted(required_out)}"
            )
        self.stop_distance = stop_distance
        self.brake_margin = brake_margin
        self.brake_decel = brake_decel
        self.side_stop_distance = side_stop_distance
        self.steer_gain = steer_gain
        self.v_max = v_max
        self.w_max = w_max
        self._last_steer = 0.0
        # calibrate so a fully clear view passes the desired speed through
        clear = self.rulebase.infer(self._clearances(SonarArray((math.inf,) * 8)))
        var = self.rulebase.outputs["speed_factor"]
        self._factor_scale = 1.0 / defuzzify_centroid(clear["speed_factor"], var.lo, var.hi, 1.0)

    @staticmethod
    def _clearances(sonar: SonarArray) -> dict[str, float]:
        return {
            "front": _clearance(sonar, SONAR_FRONT),
            "front_left": _clearance(sonar, (SONAR_FRONT[0],)),
            "front_right": _clearance(sonar, (SONAR_FRONT[1],)),
            "left": _clearance(sonar, SONAR_LEFT),
            "right": _clearance(sonar, SONAR_RIGHT),
        }

    @property
    def hard_stop_at(self) -> float:
        return self.stop_distance + self.brake_margin

    def adjust(self, sonar: SonarArray, desired: Twist) -> Twist:
        clearances = self._clearances(sonar)
        front = clearances["front"]
        sets = self.rulebase.infer(clearances)
        speed_var = self.rulebase.outputs["speed_factor"]
        steer_var = self.rulebase.outputs["steer"]
        factor = defuzzify_centroid(sets["speed_factor"], speed_var.lo, speed_var.hi, 0.0)
        factor = min(max(factor * self._factor_scale, 0.0), 1.0)
        steer = defuzzify_centroid(sets["steer"], steer_var.lo, steer_var.hi, self._last_steer)
        self._last_steer = steer

        travel_clear = front if desired.v >= 0 else _clearance(sonar, SONAR_REAR)
        speed = desired.v * factor
        envelope = math.sqrt(2.0 * self.brake_decel * max(travel_clear - self.hard_stop_at, 0.0))
        if desired.v >= 0:
            speed = min(speed, envelope)
        else:
            speed = max(speed, -envelope)
        # crisp overrides: no forward motion at or inside the stop line,
        # and stop-and-turn when a flank is about to scrape
        if front <= self.hard_stop_at:
            speed = min(speed, 0.0)
        if min(clearances["left"], clearances["right"]) <= self.side_stop_distance:
            speed = min(speed, 0.0)
        w = desired.w + steer * self.steer_gain
        return Twist(speed, w).clamped(self.v_max, self.w_max)


def build_homing_rules() -> RuleBase:
    """Heading error -> turn command and speed factor."""
    err = _terms(
        Variable("heading_error", -math.pi, math.pi),
        trap("NL", -math.pi, -math.pi, -1.6, -0.4),
        tri("NS", -1.6, -0.4, 0.0),
        tri("Z", -0.4, 0.0, 0.4),
        tri("PS", 0.0, 0.4, 1.6),
        trap("PL", 0.4, 1.6, math.pi, math.pi),
    )
    turn = _terms(
        Variable("turn", -1.0, 1.0),
        tri("hardright", -1.5, -1.0, -0.5),
        tri("right", -1.0, -0.5, 0.0),
        tri("zero", -0.5, 0.0, 0.5),
        tri("left", 0.0, 0.5, 1.0),
        tri("hardleft", 0.5, 1.0, 1.5),
    )
    speed = _terms(
        Variable("speed_factor", 0.0, 1.0),
        tri("stop", -0.5, 0.0, 0.5),
        tri("half", 0.0, 0.5, 1.0),
        tri("full", 0.5, 1.0, 1.5),
    )
    rules = [
        Rule((("heading_error", "NL"),), (("turn", "hardright"), ("speed_factor", "stop"))),
        Rule((("heading_error", "NS"),), (("turn", "right"), ("speed_factor", "half"))),
        Rule((("heading_error", "Z"),), (("turn", "zero"), ("speed_factor", "full"))),
        Rule((("heading_error", "PS"),), (("turn", "left"), ("speed_factor", "half"))),
        Rule((("heading_error", "PL"),), (("turn", "hardleft"), ("speed_factor", "stop"))),
    ]
    return RuleBase([err], [turn, speed], rules)


class SafePointController:
    """Steers to the safe point; composes with obstacle avoidance.

    Emits a zero twist (and reports arrival) inside the 0.1 m arrival
    radius. Speed tapers linearly inside slow_radius so the approach can
    actually stop within the radius.
    """

    def __init__(
        self,
        arrival_radius: float = 0.1,
        cruise_speed: float = 0.8,
        slow_radius: float = 1.0,
        turn_gain: float = 1.0,
        avoidance: ObstacleAvoidanceController | None = None,
    ):
        self.rulebase = build_homing_rules()
        self.arrival_radius = arrival_radius
        self.cruise_speed = cruise_speed
        self.slow_radius = slow_radius
        self.turn_gain = turn_gain
        self.avoidance = avoidance or ObstacleAvoidanceController()

    def command(self, pose: Pose2D, safe_point: Pose2D, sonar: SonarArray) -> tuple[Twist, bool]:
        dx = safe_point.x - pose.x
        dy = safe_point.y - pose.y
        dist = math.hypot(dx, dy)
        if dist <= self.arrival_radius:
            return Twist(0.0, 0.0), True
        error = wrap_angle(math.atan2(dy, dx) - pose.theta)
        sets = self.rulebase.infer({"heading_error": error})
        turn_var = self.rulebase.outputs["turn"]
        speed_var = self.rulebase.outputs["speed_factor"]
        turn = defuzzify_centroid(sets["turn"], turn_var.lo, turn_var.hi, 0.0)
        factor = defuzzify_centroid(sets["speed_factor"], speed_var.lo, speed_var.hi, 0.0)
        taper = min(dist / self.slow_radius, 1.0)
        desired = Twist(self.cruise_speed * factor * taper, turn * self.turn_gain)
        return self.avoidance.adjust(sonar, desired), False


# Module-level conveniences matching the operation names; they share
# default controller instances, so prefer the classes when isolated state
# matters (e.g. several robots).
_speed_controller: AdaptiveSpeedController | None = None
_avoidance_controller: ObstacleAvoidanceController | None = None
_safepoint_controller: SafePointController | None = None


def adapt_speed(condition: NetworkCondition) -> float:
    global _speed_controller
    if _speed_controller is None:
        _speed_controller = AdaptiveSpeedController()
    return _speed_controller.v_limit(condition)


def avoid_obstacles(sonar: SonarArray, desired: Twist) -> Twist:
    global _avoidance_controller
    if _avoidance_controller is None:
        _avoidance_controller = ObstacleAvoidanceController()
    return _avoidance_controller.adjust(sonar, desired)


def home_to_safe_point(pose: Pose2D, safe_point: Pose2D, sonar: SonarArray) -> Twist:
    global _safepoint_controller
    if _safepoint_controller is None:
        _safepoint_controller = SafePointController()
    twist, _ = _safepoint_controller.command(pose, safe_point, sonar)
    return twist
