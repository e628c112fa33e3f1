"""2D geometry primitives shared by the world, sensor and mapping code.

Angles are radians, world frame: x east, y north, theta CCW from +x,
normalized to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TAU = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % TAU


@dataclass(frozen=True)
class Pose2D:
    """Robot position and heading in the world frame."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.theta})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def heading_vector(self) -> tuple[float, float]:
        return math.cos(self.theta), math.sin(self.theta)


@dataclass(frozen=True)
class Twist:
    """Commanded forward (m/s) and angular (rad/s) velocity."""

    v: float
    w: float

    def clamped(self, v_max: float, w_max: float) -> "Twist":
        return Twist(
            min(max(self.v, -v_max), v_max),
            min(max(self.w, -w_max), w_max),
        )


@dataclass(frozen=True)
class Polygon:
    """Convex obstacle given by its vertices (any winding order)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")

    def edges(self) -> list[tuple[float, float, float, float]]:
        pts = self.vertices
        return [
            (pts[i][0], pts[i][1], pts[(i + 1) % len(pts)][0], pts[(i + 1) % len(pts)][1])
            for i in range(len(pts))
        ]

    def contains(self, x: float, y: float) -> bool:
        """Point-in-convex-polygon test (boundary counts as inside)."""
        sign = 0
        pts = self.vertices
        for i in range(len(pts)):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % len(pts)]
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if abs(cross) < 1e-12:
                continue
            s = 1 if cross > 0 else -1
            if sign == 0:
                sign = s
            elif s != sign:
                return False
        return True


@dataclass(frozen=True)
class Wall:
    """Thin line-segment obstacle."""

    x1: float
    y1: float
    x2: float
    y2: float


Obstacle = Polygon | Wall


def obstacle_segments(obstacles: tuple[Obstacle, ...]) -> list[tuple[float, float, float, float]]:
    segs: list[tuple[float, float, float, float]] = []
    for obs in obstacles:
        if isinstance(obs, Polygon):
            segs.extend(obs.edges())
        else:
            segs.append((obs.x1, obs.y1, obs.x2, obs.y2))
    return segs


def bounds_segments(bounds: tuple[float, float, float, float]) -> list[tuple[float, float, float, float]]:
    xmin, ymin, xmax, ymax = bounds
    return [
        (xmin, ymin, xmax, ymin),
        (xmax, ymin, xmax, ymax),
        (xmax, ymax, xmin, ymax),
        (xmin, ymax, xmin, ymin),
    ]


class SegmentSet:
    """Immutable batch of segments with vectorized ray-cast / distance queries."""

    def __init__(self, segments: list[tuple[float, float, float, float]]):
        arr = np.asarray(segments, dtype=float).reshape(-1, 4)
        self.p1 = arr[:, 0:2]
        self.p2 = arr[:, 2:4]
        self.edge = self.p2 - self.p1

    def __len__(self) -> int:
        return self.p1.shape[0]

    def raycast(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Smallest positive hit distance per ray, inf when nothing is hit.

        origins, dirs: (R, 2) arrays; dirs need not be normalized but hit
        distances are in units of |dir|, so pass unit vectors.
        """
        if len(self) == 0:
            return np.full(origins.shape[0], np.inf)
        o = origins[:, None, :]  # (R,1,2)
        d = dirs[:, None, :]
        q = self.p1[None, :, :]  # (1,S,2)
        e = self.edge[None, :, :]
        denom = d[..., 0] * e[..., 1] - d[..., 1] * e[..., 0]  # (R,S)
        qo = q - o
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qo[..., 0] * e[..., 1] - qo[..., 1] * e[..., 0]) / denom
            u = (qo[..., 0] * d[..., 1] - qo[..., 1] * d[..., 0]) / denom
        valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= -1e-12) & (u <= 1.0 + 1e-12)
        t = np.where(valid, t, np.inf)
        return t.min(axis=1)

    def distances_to_point(self, x: float, y: float) -> np.ndarray:
        """Euclidean distance from (x, y) to each segment."""
        if len(self) == 0:
            return np.empty(0)
        p = np.array([x, y])
        rel = p[None, :] - self.p1
        seg_len2 = np.einsum("ij,ij->i", self.edge, self.edge)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.einsum("ij,ij->i", rel, self.edge) / seg_len2
        t = np.clip(np.nan_to_num(t), 0.0, 1.0)
        closest = self.p1 + t[:, None] * self.edge
        return np.hypot(closest[:, 0] - x, closest[:, 1] - y)


@dataclass(frozen=True)
class WorldModel:
    """Rectangular world with obstacles, a safe point and a start pose.

    The bounds rectangle acts as an outer wall: the robot collides with it
    like with any obstacle.
    """

    bounds: tuple[float, float, float, float]
    obstacles: tuple[Obstacle, ...] = ()
    safe_point: Pose2D = Pose2D(0.0, 0.0, 0.0)
    start: Pose2D = Pose2D(0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"degenerate bounds {self.bounds}")
        if not self.point_inside_bounds(self.safe_point.x, self.safe_point.y):
            raise ValueError("safe point outside world bounds")
        if self.point_in_obstacle(self.safe_point.x, self.safe_point.y):
            raise ValueError("safe point inside an obstacle")

    @cached_property
    def segments(self) -> SegmentSet:
        """All collision/sensing segments: obstacle edges plus the bounds walls."""
        return SegmentSet(obstacle_segments(self.obstacles) + bounds_segments(self.bounds))

    @cached_property
    def obstacle_only_segments(self) -> SegmentSet:
        return SegmentSet(obstacle_segments(self.obstacles))

    def point_inside_bounds(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def point_in_obstacle(self, x: float, y: float) -> bool:
        return any(isinstance(o, Polygon) and o.contains(x, y) for o in self.obstacles)

    def body_collides(self, x: float, y: float, radius: float) -> bool:
        """True when a robot body disc at (x, y) overlaps any obstacle or leaves bounds."""
        if not self.point_inside_bounds(x, y):
            return True
        if self.point_in_obstacle(x, y):
            return True
        dists = self.segments.distances_to_point(x, y)
        return bool(len(dists) and dists.min() < radius)

    def clearance(self, x: float, y: float) -> float:
        """Distance from a point to the nearest obstacle edge or bounds wall."""
        dists = self.segments.distances_to_point(x, y)
        return float(dists.min()) if len(dists) else math.inf
