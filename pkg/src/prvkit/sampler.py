"""Statistical sampler emitting callstack/counter events through the tracer.

Two modes: time-based sampling with optional jitter to break aliasing
against periodic program behavior, and counter-based sampling that fires
each time an accumulating count crosses a threshold (e.g. one sample per
1,000 dispatched instructions).

The time schedule is a deterministic function of the seed: interval k is
drawn Uniform[period*(1-j), period*(1+j)]. Tests and the demo drive the
schedule through poll() against a virtual clock; run_threaded() attaches
a real-time polling thread for live use.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import SamplerLifecycleError, SamplerModeError
from .tracer import Tracer

TIME = "time"
COUNTER = "counter"

DEFAULT_CALLSTACK_EVENT_TYPE = 30000100
DEFAULT_COUNTER_EVENT_TYPE = 30000200


@dataclass
class SamplerConfig:
    mode: str = TIME
    period_ns: int = 1_000_000
    jitter_fraction: float = 0.0
    counter_threshold: int = 1000
    callstack_event_type: int = DEFAULT_CALLSTACK_EVENT_TYPE
    counter_event_type: int = DEFAULT_COUNTER_EVENT_TYPE
    rng_seed: int = 0
    #: emit one (type + depth, frame) pair per stack frame instead of
    #: only the innermost frame
    full_stack: bool = False
    #: optional per-sample counter snapshot attached to time-mode samples
    counter_snapshot_fn: Callable[[], int] | None = None

    def validate(self) -> None:
        if self.mode not in (TIME, COUNTER):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.mode == TIME and self.period_ns <= 0:
            raise ValueError("period_ns must be positive in time mode")
        if self.mode == COUNTER and self.counter_threshold <= 0:
            raise ValueError("counter_threshold must be positive in counter mode")
        if not 0 <= self.jitter_fraction < 1:
            raise ValueError("jitter_fraction must be in [0, 1)")

    @classmethod
    def load(cls, path: str | None = None, env: bool = True) -> "SamplerConfig":
        """Read sample.* keys from the shared tracer config file."""
        import os

        from .config import ENV_CONFIG, parse_kv_file

        cfg = cls()
        if path is None and env:
            path = os.environ.get(ENV_CONFIG) or None
        if path:
            raw = parse_kv_file(path)
            if "sample.mode" in raw:
                cfg.mode = raw["sample.mode"]
            if "sample.period_ns" in raw:
                cfg.period_ns = int(raw["sample.period_ns"])
            if "sample.jitter" in raw:
                cfg.jitter_fraction = float(raw["sample.jitter"])
            if "sample.counter_threshold" in raw:
                cfg.counter_threshold = int(raw["sample.counter_threshold"])
        cfg.validate()
        return cfg


class CallstackSource:
    """Abstract stack acquisition: a callback returning frame ids,
    innermost first. May return an empty list when no stack is known."""

    def __init__(self, fn: Callable[[], Sequence[int]]):
        self.fn = fn

    def frames(self) -> Sequence[int]:
        return self.fn()


@dataclass
class SamplerReport:
    samples: int
    intervals: int


class Sampler:
    def __init__(self, tracer: Tracer, config: SamplerConfig, source: CallstackSource):
        config.validate()
        self.tracer = tracer
        self.config = config
        self.source = source
        self.running = True
        self.samples = 0
        #: raw interval draws (ns, float) for schedule diagnostics
        self.intervals: list[float] = []
        self._rng = random.Random(config.rng_seed)
        self._ctx = tracer._new_context(open_state=False)
        self._lock = threading.Lock()
        self._counter_total = 0
        self._next_due: float = 0.0
        self._thread: threading.Thread | None = None
        self._stop_event = threading.Event()
        if config.mode == TIME:
            self._next_due = tracer.now() + self._draw_interval()

    def _draw_interval(self) -> float:
        p, j = self.config.period_ns, self.config.jitter_fraction
        if j == 0:
            interval = float(p)
        else:
            interval = self._rng.uniform(p * (1 - j), p * (1 + j))
        self.intervals.append(interval)
        return interval

    def _emit_sample(self, at_time: int, value: int | None = None) -> None:
        cfg = self.config
        if value is not None:
            pairs = [(cfg.counter_event_type, value)]
        else:
            frames = list(self.source.frames())
            if not frames:
                frames = [0]
            if cfg.full_stack:
                pairs = [
                    (cfg.callstack_event_type + depth, frame)
                    for depth, frame in enumerate(frames)
                ]
            else:
                pairs = [(cfg.callstack_event_type, frames[0])]
            if cfg.counter_snapshot_fn is not None:
                pairs.append((cfg.counter_event_type, cfg.counter_snapshot_fn()))
        self.tracer._emit_pairs(pairs, at_time=at_time, ctx=self._ctx)
        self.samples += 1

    # -- time mode ----------------------------------------------------------

    def poll(self, now_ns: int | None = None) -> int:
        """Emit every sample due at or before now; returns how many fired."""
        self._require_running()
        if self.config.mode != TIME:
            raise SamplerModeError("poll applies to time mode")
        now = self.tracer.now() if now_ns is None else now_ns
        fired = 0
        with self._lock:
            while self._next_due <= now:
                self._emit_sample(int(round(self._next_due)))
                self._next_due += self._draw_interval()
                fired += 1
        return fired

    def run_threaded(self, real_clock_poll_s: float = 0.001) -> None:
        """Attach a real-time polling thread (production timing context)."""
        self._require_running()
        if self._thread is not None:
            raise SamplerLifecycleError("sampling thread already running")

        def loop():
            while not self._stop_event.wait(real_clock_poll_s):
                if not self.running:
                    return
                self.poll()

        self._thread = threading.Thread(target=loop, daemon=True, name="prvkit-sampler")
        self._thread.start()

    # -- counter mode -------------------------------------------------------

    def counter_tick(self, increment: int) -> int:
        """Accumulate; one sample per threshold crossing, residue carries."""
        self._require_running()
        if self.config.mode != COUNTER:
            raise SamplerModeError("counter_tick applies to counter mode")
        if increment < 0:
            raise ValueError("counter increments are non-negative")
        fired = 0
        threshold = self.config.counter_threshold
        with self._lock:
            self._counter_total += increment
            due = self._counter_total // threshold
            now = self.tracer.now()
            while self.samples < due:
                self._emit_sample(now, value=(self.samples + 1) * threshold)
                fired += 1
        return fired

    # -- lifecycle ----------------------------------------------------------

    def _require_running(self) -> None:
        if not self.running:
            raise SamplerLifecycleError("sampler already stopped")

    def stop(self) -> SamplerReport:
        if not self.running:
            raise SamplerLifecycleError("sampler already stopped")
        self.running = False
        self._stop_event.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
        self.tracer.active_sampler = None
        return SamplerReport(samples=self.samples, intervals=len(self.intervals))


def start_sampler(tracer: Tracer, config: SamplerConfig, source: CallstackSource) -> Sampler:
    """Attach a sampler to an active tracer; one sampler per tracer."""
    tracer._require_active("start_sampler")
    if tracer.active_sampler is not None:
        raise SamplerLifecycleError("a sampler is already running on this tracer")
    sampler = Sampler(tracer, config, source)
    tracer.active_sampler = sampler
    return sampler


def counter_tick(sampler: Sampler, increment: int) -> int:
    return sampler.counter_tick(increment)


def stop_sampler(sampler: Sampler) -> SamplerReport:
    return sampler.stop()
