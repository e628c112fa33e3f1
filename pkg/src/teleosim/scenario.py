"""Scenario and profile file formats plus seeded world generators.

World file (plain text, '#' comments):

    bounds <xmin> <ymin> <xmax> <ymax>
    start  <x> <y> <theta_rad>
    safe   <x> <y> [theta_rad]
    poly   <x1> <y1> <x2> <y2> <x3> <y3> [...]
    wall   <x1> <y1> <x2> <y2>

Delay profile file:

    row <size_bytes> <min_ms> <avg_ms> <max_ms>     (one or more)
    loss <rate>
    reorder <rate>
    seed <int>
    media_extra <ms>
    interrupt <start_ms> <duration_ms>              (optional, repeatable)
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Polygon, Pose2D, Wall, WorldModel
from .netsim import DelayProfile


class ScenarioError(ValueError):
    pass


def parse_world(text: str) -> WorldModel:
    bounds = None
    start = Pose2D(0.0, 0.0, 0.0)
    safe = None
    obstacles: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key, args = parts[0].lower(), parts[1:]
        try:
            vals = [float(a) for a in args]
            if key == "bounds" and len(vals) == 4:
                bounds = tuple(vals)
            elif key == "start" and len(vals) == 3:
                start = Pose2D(*vals)
            elif key == "safe" and len(vals) in (2, 3):
                safe = Pose2D(vals[0], vals[1], vals[2] if len(vals) == 3 else 0.0)
            elif key == "poly" and len(vals) >= 6 and len(vals) % 2 == 0:
                pts = tuple((vals[i], vals[i + 1]) for i in range(0, len(vals), 2))
                obstacles.append(Polygon(pts))
            elif key == "wall" and len(vals) == 4:
                obstacles.append(Wall(*vals))
            else:
                raise ScenarioError(f"line {lineno}: bad directive {line!r}")
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"line {lineno}: cannot parse {line!r}") from exc
    if bounds is None:
        raise ScenarioError("world file needs a bounds line")
    if safe is None:
        safe = Pose2D(
            (bounds[0] + bounds[2]) / 2.0, (bounds[1] + bounds[3]) / 2.0, 0.0
        )
    return WorldModel(bounds=bounds, obstacles=tuple(obstacles), safe_point=safe, start=start)


def world_to_text(world: WorldModel) -> str:
    lines = ["bounds " + " ".join(f"{b:g}" for b in world.bounds)]
    lines.append(f"start {world.start.x:g} {world.start.y:g} {world.start.theta:g}")
    lines.append(f"safe {world.safe_point.x:g} {world.safe_point.y:g} {world.safe_point.theta:g}")
    for obs in world.obstacles:
        if isinstance(obs, Polygon):
            pts = " ".join(f"{x:g} {y:g}" for x, y in obs.vertices)
            lines.append(f"poly {pts}")
        else:
            lines.append(f"wall {obs.x1:g} {obs.y1:g} {obs.x2:g} {obs.y2:g}")
    return "\n".join(lines) + "\n"


def load_world(path: str) -> WorldModel:
    with open(path, "r", encoding="ascii") as fh:
        return parse_world(fh.read())


def parse_profile(text: str) -> tuple[DelayProfile, list[tuple[float, float]]]:
    rows: list[tuple[float, float, float, float]] = []
    loss = 0.0
    reorder = 0.0
    seed = 0
    media_extra = None
    interrupts: list[tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key, args = parts[0].lower(), parts[1:]
        try:
            if key == "row":
                rows.append(tuple(float(a) for a in args))
            elif key == "loss":
                loss = float(args[0])
            elif key == "reorder":
                reorder = float(args[0])
            elif key == "seed":
                seed = int(args[0])
            elif key == "media_extra":
                media_extra = float(args[0])
            elif key == "interrupt":
                interrupts.append((float(args[0]), float(args[1])))
            else:
                raise ScenarioError(f"line {lineno}: bad directive {line!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"line {lineno}: cannot parse {line!r}") from exc
    kwargs = dict(loss_rate=loss, reorder_rate=reorder, seed=seed)
    if rows:
        kwargs["rows"] = tuple(rows)
    if media_extra is not None:
        kwargs["media_extra_ms"] = media_extra
    return DelayProfile(**kwargs), interrupts


def profile_to_text(profile: DelayProfile, interrupts: list[tuple[float, float]] = ()) -> str:
    lines = [f"row {int(s)} {mn:g} {av:g} {mx:g}" for s, mn, av, mx in profile.rows]
    lines.append(f"loss {profile.loss_rate:g}")
    lines.append(f"reorder {profile.reorder_rate:g}")
    lines.append(f"seed {profile.seed}")
    lines.append(f"media_extra {profile.media_extra_ms:g}")
    lines.extend(f"interrupt {s:g} {d:g}" for s, d in interrupts)
    return "\n".join(lines) + "\n"


def load_profile(path: str) -> tuple[DelayProfile, list[tuple[float, float]]]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_profile(fh.read())


# ---------------------------------------------------------------------------
# canned worlds and seeded generators


def campus_world() -> WorldModel:
    """Default outdoor-scale world: sparse obstacles, long sight lines.

    Sized so roughly half the laser beams run past the 80 m range, which
    puts the default telemetry payload near its nominal ~500 bytes.
    """
    obstacles = (
        Polygon(((20.0, 18.0), (30.0, 18.0), (30.0, 26.0), (20.0, 26.0))),
        Polygon(((55.0, 40.0), (70.0, 40.0), (70.0, 52.0), (55.0, 52.0))),
        Polygon(((15.0, 45.0), (25.0, 42.0), (28.0, 50.0), (18.0, 53.0))),
        Polygon(((60.0, 12.0), (75.0, 12.0), (75.0, 20.0), (60.0, 20.0))),
        Wall(40.0, 28.0, 48.0, 28.0),
    )
    return WorldModel(
        bounds=(0.0, 0.0, 90.0, 64.0),
        obstacles=obstacles,
        safe_point=Pose2D(45.0, 10.0, 0.0),
        start=Pose2D(10.0, 8.0, 0.0),
    )


def empty_world(size: float = 100.0) -> WorldModel:
    half = size / 2.0
    return WorldModel(bounds=(-half, -half, half, half))


def corridor_scenario(seed: int) -> WorldModel:
    """Blocked corridor with 1-3 box obstacles for assisted-mode runs.

    The corridor runs along +x; obstacles leave at least a 1.2 m passable
    gap so a 0.6 m robot with its stop margin can thread through before it
    finally has to stop at the end wall.
    """
    rng = np.random.default_rng(seed)
    width = rng.uniform(3.0, 4.5)
    length = rng.uniform(14.0, 18.0)
    margin = 2.0
    bounds = (0.0, -width / 2.0 - margin, length + margin, width / 2.0 + margin)
    obstacles: list = [
        Wall(0.0, -width / 2.0, length, -width / 2.0),
        Wall(0.0, width / 2.0, length, width / 2.0),
        Wall(length, -width / 2.0, length, width / 2.0),
    ]
    n_obs = int(rng.integers(1, 4))
    x = 4.0
    for _ in range(n_obs):
        x += rng.uniform(2.5, 4.0)
        if x > length - 4.0:
            break
        side = 1.0 if rng.random() < 0.5 else -1.0
        depth = rng.uniform(0.5, 1.0)
        across = rng.uniform(0.6, width - 1.6)
        y_edge = side * width / 2.0
        y_in = y_edge - side * across
        obstacles.append(
            Polygon(
                (
                    (x, y_edge),
                    (x + depth, y_edge),
                    (x + depth, y_in),
                    (x, y_in),
                )
            )
        )
        x += depth
    return WorldModel(
        bounds=bounds,
        obstacles=tuple(obstacles),
        safe_point=Pose2D(1.0, 0.0, 0.0),
        start=Pose2D(1.0, 0.0, 0.0),
    )


def safepoint_scenario(seed: int) -> WorldModel:
    """Open world with a reachable safe point and benign obstacles.

    Obstacles keep a 1.2 m clear tube around the straight start-to-safe
    segment, so the reactive homing controller cannot be trapped; it still
    has to skirt them when the fuzzy steering cuts corners. The start
    heading points roughly along the tube, so a robot driving blind during
    a link blackout stays in cleared ground.
    """
    rng = np.random.default_rng(seed)
    world_half = 14.0
    sx0, sy0 = rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)
    while True:
        dx, dy = rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)
        dist = math.hypot(dx - sx0, dy - sy0)
        if 4.0 <= dist <= 10.0:
            safe = Pose2D(dx, dy, 0.0)
            break
    bearing = math.atan2(dy - sy0, dx - sx0)
    start = Pose2D(sx0, sy0, bearing + rng.uniform(-0.4, 0.4))
    sx, sy = start.x, start.y
    ex, ey = safe.x, safe.y
    seg_len = math.hypot(ex - sx, ey - sy)
    obstacles = []
    for _ in range(int(rng.integers(2, 5))):
        for _attempt in range(50):
            cx = rng.uniform(-world_half + 2.0, world_half - 2.0)
            cy = rng.uniform(-world_half + 2.0, world_half - 2.0)
            # distance from the obstacle center to the start->safe segment
            t = max(0.0, min(1.0, ((cx - sx) * (ex - sx) + (cy - sy) * (ey - sy)) / seg_len**2))
            px, py = sx + t * (ex - sx), sy + t * (ey - sy)
            r = rng.uniform(0.4, 0.8)
            if math.hypot(cx - px, cy - py) < r + 1.2:
                continue
            if math.hypot(cx - sx, cy - sy) < r + 1.0 or math.hypot(cx - ex, cy - ey) < r + 1.0:
                continue
            n_v = int(rng.integers(4, 7))
            angles = np.sort(rng.uniform(0, 2 * math.pi, n_v))
            pts = tuple((cx + r * math.cos(a), cy + r * math.sin(a)) for a in angles)
            obstacles.append(Polygon(pts))
            break
    return WorldModel(
        bounds=(-world_half, -world_half, world_half, world_half),
        obstacles=tuple(obstacles),
        safe_point=safe,
        start=start,
    )


def reference_course_world() -> WorldModel:
    """Straight 24 m reference course used for the path comparison report."""
    return WorldModel(
        bounds=(-2.0, -3.0, 28.0, 3.0),
        obstacles=(),
        safe_point=Pose2D(1.0, 1.0, 0.0),
        start=Pose2D(0.0, 0.0, 0.0),
    )
