"""Sensor simulation from world ground truth: sonar ring, laser scanner,
compass, GPS, battery and the PTZ camera renderer.

All functions are pure given (world, pose, config, rng) and safe to call
from any thread.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, WorldModel

NO_ECHO = math.inf

SONAR_MIN = 0.04
SONAR_MAX = 4.0
LASER_MIN = 0.04
LASER_MAX = 80.0
LASER_FOV_DEG = 100.0
LASER_RESOLUTIONS = (0.25, 0.5, 1.0)

PAN_LIMIT = 100.0
TILT_LIMIT = 25.0

METERS_PER_DEG_LAT = 111_320.0


class ConfigError(ValueError):
    """Invalid sensor configuration (e.g. unsupported laser resolution)."""


@dataclass(frozen=True)
class SonarArray:
    """Eight ranges in meters; NO_ECHO (inf) marks no return within 4 m."""

    ranges: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.ranges) != 8:
            raise ValueError("sonar array has 8 sensors")

    def min_of(self, indices: tuple[int, ...]) -> float:
        return min(self.ranges[i] for i in indices)


@dataclass(frozen=True)
class LaserScan:
    resolution_deg: float
    ranges: tuple[float, ...]

    @property
    def fov_deg(self) -> float:
        return LASER_FOV_DEG


@dataclass(frozen=True)
class CompassReading:
    heading_deg: float  # [0, 360), quantized to 0.1


@dataclass(frozen=True)
class GpsReading:
    latitude: float
    longitude: float
    fix_valid: bool = True


@dataclass(frozen=True)
class PtzState:
    """Pan/tilt in degrees, zoom factor; construction clamps to the ranges."""

    pan: float = 0.0
    tilt: float = 0.0
    zoom: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "pan", min(max(self.pan, -PAN_LIMIT), PAN_LIMIT))
        object.__setattr__(self, "tilt", min(max(self.tilt, -TILT_LIMIT), TILT_LIMIT))
        object.__setattr__(self, "zoom", max(self.zoom, 1.0))


@dataclass(frozen=True)
class CameraFrame:
    stamp_ms: int
    width: int
    height: int
    pixels: bytes
    frame_seq: int
    encoding: str = "png"


# Sonar mounting: two sensors per side. Angles are relative to the robot
# heading; sensors sit on the body shell and measure from their own face.
SONAR_ANGLES_DEG = (10.0, -10.0, 80.0, 100.0, -80.0, -100.0, 170.0, -170.0)
SONAR_FRONT = (0, 1)
SONAR_LEFT = (2, 3)
SONAR_RIGHT = (4, 5)
SONAR_REAR = (6, 7)


@dataclass(frozen=True)
class SonarRig:
    mount_angles_deg: tuple[float, ...] = SONAR_ANGLES_DEG
    mount_radius: float = 0.3  # sensors flush with the body shell
    beam_halfwidth_deg: float = 20.0  # wide ultrasonic lobe
    rays_per_beam: int = 9


def cast_sonar(world: WorldModel, pose: Pose2D, rig: SonarRig = SonarRig()) -> SonarArray:
    """Ray-cast the sonar ring; each beam is the min over a small ray fan."""
    n = len(rig.mount_angles_deg)
    spread = np.linspace(-rig.beam_halfwidth_deg, rig.beam_halfwidth_deg, rig.rays_per_beam)
    angles = np.deg2rad(np.asarray(rig.mount_angles_deg)[:, None] + spread[None, :]) + pose.theta
    angles = angles.reshape(-1)
    mount = np.deg2rad(np.asarray(rig.mount_angles_deg)) + pose.theta
    ox = pose.x + rig.mount_radius * np.cos(mount)
    oy = pose.y + rig.mount_radius * np.sin(mount)
    origins = np.stack(
        [np.repeat(ox, rig.rays_per_beam), np.repeat(oy, rig.rays_per_beam)], axis=1
    )
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    hits = world.segments.raycast(origins, dirs).reshape(n, rig.rays_per_beam)
    best = hits.min(axis=1)
    ranges = []
    for r in best:
        if r > SONAR_MAX:
            ranges.append(NO_ECHO)
        else:
            ranges.append(max(float(r), SONAR_MIN))
    return SonarArray(tuple(ranges))


def cast_laser(world: WorldModel, pose: Pose2D, resolution_deg: float = 1.0) -> LaserScan:
    """Scan [-50, +50] degrees about heading from the robot center."""
    if resolution_deg not in LASER_RESOLUTIONS:
        raise ConfigError(f"unsupported laser resolution {resolution_deg}")
    count = round(LASER_FOV_DEG / resolution_deg) + 1
    rel = np.linspace(-LASER_FOV_DEG / 2.0, LASER_FOV_DEG / 2.0, count)
    angles = np.deg2rad(rel) + pose.theta
    origins = np.tile([pose.x, pose.y], (count, 1))
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    hits = world.segments.raycast(origins, dirs)
    ranges = tuple(
        NO_ECHO if r > LASER_MAX else max(float(r), LASER_MIN) for r in hits
    )
    return LaserScan(resolution_deg=resolution_deg, ranges=ranges)


@dataclass(frozen=True)
class CompassConvention:
    """Mapping from world theta to compass degrees.

    Default is a real compass: 0 deg at world +y (north), increasing
    clockwise. The identity convention (0 deg at +x, CCW) is available for
    tests and debugging.
    """

    zero_axis_deg: float = 90.0  # world angle (deg CCW from +x) that reads 0
    clockwise: bool = True


IDENTITY_COMPASS = CompassConvention(zero_axis_deg=0.0, clockwise=False)


def read_compass(
    pose: Pose2D,
    convention: CompassConvention = CompassConvention(),
    noise_sigma_deg: float = 0.0,
    rng: np.random.Generator | None = None,
) -> CompassReading:
    theta_deg = math.degrees(pose.theta)
    if convention.clockwise:
        heading = convention.zero_axis_deg - theta_deg
    else:
        heading = theta_deg - convention.zero_axis_deg
    if noise_sigma_deg > 0.0:
        if rng is None:
            raise ValueError("noise requires an rng")
        heading += rng.normal(0.0, noise_sigma_deg)
    heading %= 360.0
    quantized = round(heading / 0.1) * 0.1
    return CompassReading(heading_deg=quantized % 360.0)


def local_to_gps(x: float, y: float, origin: tuple[float, float]) -> tuple[float, float]:
    """Equirectangular tangent-plane mapping around the configured origin."""
    lat0, lon0 = origin
    lat = lat0 + y / METERS_PER_DEG_LAT
    lon = lon0 + x / (METERS_PER_DEG_LAT * math.cos(math.radians(lat0)))
    return lat, lon


def gps_to_local(lat: float, lon: float, origin: tuple[float, float]) -> tuple[float, float]:
    lat0, lon0 = origin
    y = (lat - lat0) * METERS_PER_DEG_LAT
    x = (lon - lon0) * METERS_PER_DEG_LAT * math.cos(math.radians(lat0))
    return x, y


def read_gps(
    pose: Pose2D,
    origin: tuple[float, float] = (0.0, 0.0),
    noise_sigma_m: float = 2.0,
    rng: np.random.Generator | None = None,
) -> GpsReading:
    x, y = pose.x, pose.y
    if noise_sigma_m > 0.0:
        if rng is None:
            raise ValueError("noise requires an rng")
        x += rng.normal(0.0, noise_sigma_m)
        y += rng.normal(0.0, noise_sigma_m)
    lat, lon = local_to_gps(x, y, origin)
    return GpsReading(latitude=lat, longitude=lon)


class Camera:
    """Deterministic renderer standing in for the compressed video stream.

    first_person: a raycast column renderer from the PTZ-adjusted viewpoint
    (pinhole model, wall strip height ~ 1/distance). top_down: a plan view
    of the world around the robot. Identical inputs yield identical bytes.
    """

    def __init__(
        self,
        width: int = 160,
        height: int = 120,
        mode: str = "first_person",
        encoding: str = "png",
        hfov_deg: float = 60.0,
        wall_height_m: float = 1.0,
        cam_height_m: float = 0.5,
    ):
        if mode not in ("first_person", "top_down"):
            raise ConfigError(f"unknown camera mode {mode!r}")
        if encoding not in ("png", "rgb"):
            raise ConfigError(f"unknown frame encoding {encoding!r}")
        self.width = width
        self.height = height
        self.mode = mode
        self.encoding = encoding
        self.hfov_deg = hfov_deg
        self.wall_height_m = wall_height_m
        self.cam_height_m = cam_height_m
        self._seq = 0

    def focal_px(self, zoom: float) -> float:
        hfov = math.radians(self.hfov_deg / max(zoom, 1.0))
        return (self.width / 2.0) / math.tan(hfov / 2.0)

    def render(self, world: WorldModel, pose: Pose2D, ptz: PtzState, stamp_ms: int) -> CameraFrame:
        if self.mode == "first_person":
            img = self._render_first_person(world, pose, ptz)
        else:
            img = self._render_top_down(world, pose)
        self._seq += 1
        if self.encoding == "png":
            payload = encode_png(img)
        else:
            payload = img.tobytes()
        return CameraFrame(
            stamp_ms=stamp_ms,
            width=self.width,
            height=self.height,
            pixels=payload,
            frame_seq=self._seq,
            encoding=self.encoding,
        )

    def _render_first_person(self, world: WorldModel, pose: Pose2D, ptz: PtzState) -> np.ndarray:
        w, h = self.width, self.height
        img = np.zeros((h, w, 3), dtype=np.uint8)
        f = self.focal_px(ptz.zoom)
        horizon = int(round(h / 2.0 + math.tan(math.radians(ptz.tilt)) * f))
        horizon = min(max(horizon, 0), h)
        img[:horizon] = (90, 120, 170)  # sky
        img[horizon:] = (60, 60, 60)  # floor
        view_theta = pose.theta + math.radians(ptz.pan)
        cols = np.arange(w)
        ray_angles = view_theta - np.arctan((cols - (w - 1) / 2.0) / f)
        origins = np.tile([pose.x, pose.y], (w, 1))
        dirs = np.stack([np.cos(ray_angles), np.sin(ray_angles)], axis=1)
        dists = world.segments.raycast(origins, dirs)
        # project onto the view axis to avoid fisheye distortion
        depth = dists * np.cos(ray_angles - view_theta)
        for x in range(w):
            d = depth[x]
            if not np.isfinite(d) or d <= 0.05:
                continue
            strip = int(f * self.wall_height_m / d)
            if strip <= 0:
                continue
            top = max(horizon - strip // 2 - strip % 2, 0)
            bot = min(horizon + strip // 2, h)
            shade = int(np.clip(230.0 / (1.0 + 0.25 * d), 25, 230))
            img[top:bot, x] = (shade, shade, min(shade + 20, 255))
        return img

    def _render_top_down(self, world: WorldModel, pose: Pose2D) -> np.ndarray:
        w, h = self.width, self.height
        img = np.full((h, w, 3), (40, 40, 40), dtype=np.uint8)
        xmin, ymin, xmax, ymax = world.bounds
        sx = w / (xmax - xmin)
        sy = h / (ymax - ymin)

        def to_px(x: float, y: float) -> tuple[int, int]:
            return (
                int(np.clip((x - xmin) * sx, 0, w - 1)),
                int(np.clip(h - 1 - (y - ymin) * sy, 0, h - 1)),
            )

        segs = world.segments
        for i in range(len(segs)):
            x1, y1 = segs.p1[i]
            x2, y2 = segs.p2[i]
            n = int(max(abs(x2 - x1) * sx, abs(y2 - y1) * sy, 1)) + 1
            for t in np.linspace(0.0, 1.0, n):
                px, py = to_px(x1 + t * (x2 - x1), y1 + t * (y2 - y1))
                img[py, px] = (200, 200, 200)
        px, py = to_px(pose.x, pose.y)
        img[max(py - 1, 0) : py + 2, max(px - 1, 0) : px + 2] = (220, 60, 60)
        hx, hy = to_px(pose.x + 0.6 * math.cos(pose.theta), pose.y + 0.6 * math.sin(pose.theta))
        img[hy, hx] = (250, 220, 60)
        return img


def encode_png(img: np.ndarray) -> bytes:
    """Deterministic PNG encoding (Pillow, fixed settings)."""
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


@dataclass
class BatteryModel:
    """Slow linear discharge, just enough to make the panel field move."""

    full_volts: float = 12.6
    drain_volts_per_s: float = 1e-4

    def voltage(self, t_ms: float) -> float:
        return max(self.full_volts - self.drain_volts_per_s * t_ms / 1000.0, 9.0)
