"""Nanosecond clock sources for the tracer.

The tracer timestamps records relative to an epoch captured at init.
Production uses the OS monotonic clock; tests and the synthetic
generator inject a virtual clock they drive explicitly.
"""

import threading
import time


class MonotonicClock:
    """Wraps ``time.monotonic_ns``."""

    def now_ns(self) -> int:
        return time.monotonic_ns()


class VirtualClock:
    """Manually driven clock with one independent cursor per OS thread.

    Per-thread cursors let several worker threads each play their own
    timeline while the tracer still sees non-decreasing time within any
    single thread's record stream. A fresh thread starts at 0.
    """

    def __init__(self, start_ns: int = 0):
        self._start = start_ns
        self._local = threading.local()

    def now_ns(self) -> int:
        return getattr(self._local, "cursor", self._start)

    def set(self, t_ns: int) -> None:
        if t_ns < self.now_ns():
            raise ValueError(
                f"virtual clock may not move backwards ({t_ns} < {self.now_ns()})"
            )
        self._local.cursor = t_ns

    def advance(self, delta_ns: int) -> None:
        if delta_ns < 0:
            raise ValueError("virtual clock may not move backwards")
        self._local.cursor = self.now_ns() + delta_ns
