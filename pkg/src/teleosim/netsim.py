"""Network impairment pipe calibrated to the measured 3G/Internet path.

Delay anchors give (min, avg, max) per payload size; between anchors the
three statistics are interpolated linearly (clamped at the ends). A sample
is min + X where X ~ Exp(rate) clamped to max - min, with the rate fitted
numerically so the clamped mean equals avg. This keeps every sample inside
[min, max], reproduces the measured mean, and stays right-skewed like real
network delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy.optimize import brentq

from .clock import Scheduler
from .wire import ChannelClass

# measured delay vs payload size: (bytes, min_ms, avg_ms, max_ms)
MEASURED_DELAY_TABLE = (
    (100, 79.0, 103.0, 189.0),
    (500, 99.0, 129.0, 229.0),
    (1000, 109.0, 140.0, 229.0),
    (2000, 149.0, 255.0, 410.0),
)

# Extra constant pipeline budget on the media path (capture/encode/decode),
# sized so a large frame lands around the observed ~2000 ms end to end.
MEDIA_EXTRA_MS_DEFAULT = 1745.0


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class DelayProfile:
    rows: tuple[tuple[float, float, float, float], ...] = MEASURED_DELAY_TABLE
    loss_rate: float = 0.0
    reorder_rate: float = 0.0
    seed: int = 0
    media_extra_ms: float = MEDIA_EXTRA_MS_DEFAULT

    def __post_init__(self) -> None:
        if not self.rows:
            raise ProfileError("profile needs at least one anchor row")
        last_size = -math.inf
        for size, dmin, davg, dmax in self.rows:
            if size <= last_size:
                raise ProfileError("anchor sizes must be strictly increasing")
            last_size = size
            if not (0 <= dmin <= davg <= dmax):
                raise ProfileError(f"row {size}: need 0 <= min <= avg <= max")
        if not (0.0 <= self.loss_rate < 1.0):
            raise ProfileError("loss_rate must be in [0, 1)")
        if not (0.0 <= self.reorder_rate < 1.0):
            raise ProfileError("reorder_rate must be in [0, 1)")

    def interpolate(self, size_bytes: float) -> tuple[float, float, float]:
        rows = self.rows
        if size_bytes <= rows[0][0]:
            return rows[0][1:]
        if size_bytes >= rows[-1][0]:
            return rows[-1][1:]
        for (s0, mn0, av0, mx0), (s1, mn1, av1, mx1) in zip(rows, rows[1:]):
            if s0 <= size_bytes <= s1:
                t = (size_bytes - s0) / (s1 - s0)
                return (
                    mn0 + t * (mn1 - mn0),
                    av0 + t * (av1 - av0),
                    mx0 + t * (mx1 - mx0),
                )
        raise AssertionError("unreachable")


def constant_profile(delay_ms: float, **kwargs: Any) -> DelayProfile:
    """Degenerate profile: every sample is exactly delay_ms."""
    return DelayProfile(rows=((1, delay_ms, delay_ms, delay_ms),), **kwargs)


def _fit_clamped_exp_rate(mean_excess: float, span: float) -> float:
    """Rate lambda with E[min(Exp(lambda), span)] = mean_excess.

    E[min(Exp(l), R)] = (1 - exp(-l R)) / l; solve on u = l*R.
    """
    rho = mean_excess / span

    def g(u: float) -> float:
        return (1.0 - math.exp(-u)) / u - rho

    lo, hi = 1e-9, 1.0
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e9:
            break
    u = brentq(g, lo, hi, xtol=1e-12, rtol=1e-12)
    return u / span


_EXACT = object()  # sentinel: degenerate row, no sampling needed


class DelaySampler:
    """Caches the fitted rate per queried size (sizes repeat heavily)."""

    def __init__(self, profile: DelayProfile):
        self.profile = profile
        self._cache: dict[float, tuple[float, Any, float]] = {}

    def params_for(self, size_bytes: float) -> tuple[float, Any, float]:
        hit = self._cache.get(size_bytes)
        if hit is not None:
            return hit
        dmin, davg, dmax = self.profile.interpolate(size_bytes)
        span = dmax - dmin
        mean_excess = davg - dmin
        if span <= 1e-12 or mean_excess <= 1e-12:
            params = (dmin, _EXACT, dmin if mean_excess <= 1e-12 else dmax)
        elif mean_excess >= span - 1e-12:
            params = (dmin, _EXACT, dmax)
        else:
            params = (dmin, _fit_clamped_exp_rate(mean_excess, span), dmax)
        self._cache[size_bytes] = params
        return params

    def sample(self, size_bytes: float, rng: np.random.Generator) -> float:
        dmin, rate, dmax = self.params_for(size_bytes)
        if rate is _EXACT:
            return dmax
        excess = min(rng.exponential(1.0 / rate), dmax - dmin)
        return dmin + excess


def sample_delay(size_bytes: float, profile: DelayProfile, rng: np.random.Generator) -> float:
    """One delay draw for a payload of the given size."""
    if size_bytes <= 0:
        raise ValueError("size_bytes must be positive")
    return DelaySampler(profile).sample(size_bytes, rng)


@dataclass
class PipeStats:
    sent: int = 0
    delivered: int = 0
    dropped_loss: int = 0
    dropped_window: int = 0


DeliverFn = Callable[[bytes], None]


class ImpairedPipe:
    """Bidirectional impairment pipe between the client and server sides.

    Datagram classes (TELEMETRY, MEDIA) can be dropped and reordered;
    the ADMIN_COMMAND class is never dropped, is delivered in order, and
    messages caught by an interruption window queue until it ends.
    Interruption windows black out every class in both directions.
    """

    SIDES = ("client", "server")

    def __init__(self, scheduler: Scheduler, profile: DelayProfile = DelayProfile()):
        self.scheduler = scheduler
        self.profile = profile
        self.sampler = DelaySampler(profile)
        self.windows: list[tuple[float, float]] = []
        self._rng = {
            side: np.random.default_rng([profile.seed, i]) for i, side in enumerate(self.SIDES)
        }
        self._handlers: dict[tuple[str, ChannelClass], DeliverFn] = {}
        self._last_admin: dict[str, float] = {side: -math.inf for side in self.SIDES}
        self.stats: dict[tuple[str, ChannelClass], PipeStats] = {
            (side, cls): PipeStats() for side in self.SIDES for cls in ChannelClass
        }

    def on_receive(self, side: str, channel: ChannelClass, handler: DeliverFn) -> None:
        """Register the handler that receives deliveries arriving at `side`."""
        self._handlers[(side, channel)] = handler

    def schedule_interruption(self, start_ms: float, duration_ms: float) -> None:
        if duration_ms <= 0:
            raise ProfileError("interruption duration must be positive")
        end = start_ms + duration_ms
        for s, e in self.windows:
            if start_ms < e and s < end:
                raise ProfileError(f"interruption [{start_ms}, {end}) overlaps [{s}, {e})")
        self.windows.append((start_ms, end))
        self.windows.sort()

    def in_window(self, t_ms: float) -> bool:
        return any(s <= t_ms < e for s, e in self.windows)

    def _window_end_after(self, t_ms: float) -> float:
        for s, e in self.windows:
            if s <= t_ms < e:
                return e
        return t_ms

    def send(self, from_side: str, channel: ChannelClass, payload: bytes) -> None:
        """Queue a payload from one side toward the other."""
        to_side = "server" if from_side == "client" else "client"
        now = self.scheduler.now
        rng = self._rng[from_side]
        stats = self.stats[(to_side, channel)]
        stats.sent += 1
        delay = self.sampler.sample(len(payload), rng)
        if channel is ChannelClass.ADMIN_COMMAND:
            deliver_at = max(now + delay, self._last_admin[to_side] + 1e-6)
            while self.in_window(deliver_at):
                deliver_at = max(
                    self._window_end_after(deliver_at), self._last_admin[to_side] + 1e-6
                )
            self._last_admin[to_side] = deliver_at
        else:
            if self.in_window(now):
                stats.dropped_window += 1
                return
            if self.profile.loss_rate > 0 and rng.random() < self.profile.loss_rate:
                stats.dropped_loss += 1
                return
            if self.profile.reorder_rate > 0 and rng.random() < self.profile.reorder_rate:
                delay += rng.uniform(0.0, delay)
            if channel is ChannelClass.MEDIA:
                delay += self.profile.media_extra_ms
            deliver_at = now + delay
            if self.in_window(deliver_at):
                stats.dropped_window += 1
                return
        self.scheduler.call_at(deliver_at, lambda: self._deliver(to_side, channel, payload))

    def _deliver(self, side: str, channel: ChannelClass, payload: bytes) -> None:
        handler = self._handlers.get((side, channel))
        self.stats[(side, channel)].delivered += 1
        if handler is not None:
            handler(payload)


class PipeEndpoint:
    """One side's view of the pipe: plain send/receive per channel class."""

    def __init__(self, pipe: ImpairedPipe, side: str):
        if side not in ImpairedPipe.SIDES:
            raise ValueError(f"unknown side {side!r}")
        self.pipe = pipe
        self.side = side

    def send(self, channel: ChannelClass, payload: bytes) -> None:
        self.pipe.send(self.side, channel, payload)

    def on_receive(self, channel: ChannelClass, handler: DeliverFn) -> None:
        self.pipe.on_receive(self.side, channel, handler)
