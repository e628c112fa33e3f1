"""Deterministic discrete-event scheduler (the virtual clock).

All simulation time is milliseconds. Events sharing a timestamp fire by
ascending priority, then by scheduling order, which keeps whole runs
reproducible and lets physics advance before the publishers that read it.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Callable


class Handle:
    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Scheduler:
    def __init__(self, start_ms: float = 0.0):
        self.now: float = start_ms
        self._heap: list[tuple[float, int, int, Handle, Callable[[], None]]] = []
        self._seq = itertools.count()

    def call_at(self, t_ms: float, fn: Callable[[], None], priority: int = 0) -> Handle:
        if t_ms < self.now:
            t_ms = self.now
        handle = Handle()
        heapq.heappush(self._heap, (t_ms, priority, next(self._seq), handle, fn))
        return handle

    def call_later(self, delay_ms: float, fn: Callable[[], None], priority: int = 0) -> Handle:
        return self.call_at(self.now + delay_ms, fn, priority)

    def every(
        self,
        period_ms: float,
        fn: Callable[[], None],
        first_at: float | None = None,
        priority: int = 0,
    ) -> Handle:
        """Fixed-rate periodic task; first fire defaults to now + period."""
        if period_ms <= 0:
            raise ValueError("period must be positive")
        handle = Handle()
        first = self.now + period_ms if first_at is None else first_at

        def fire(t: float) -> None:
            if handle.cancelled:
                return
            fn()
            if not handle.cancelled:
                schedule(t + period_ms)

        def schedule(t: float) -> None:
            heapq.heappush(self._heap, (t, priority, next(self._seq), handle, lambda: fire(t)))

        schedule(first)
        return handle

    def run_until(self, t_ms: float) -> None:
        """Run all events with timestamp <= t_ms, then set now = t_ms."""
        while self._heap and self._heap[0][0] <= t_ms:
            t, _, _, handle, fn = heapq.heappop(self._heap)
            self.now = t
            if not handle.cancelled:
                fn()
        self.now = t_ms

    def run_for(self, duration_ms: float) -> None:
        self.run_until(self.now + duration_ms)

    def next_event_time(self) -> float | None:
        while self._heap and self._heap[0][3].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None
