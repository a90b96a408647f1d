"""Synthetic MPI-style workload generator.

Replays a fixed-iteration compute / waitany / allreduce cycle through the
tracer, one worker thread per simulated rank against a virtual clock.
Message traffic flows between topology neighbors inside the waitany
blocks. The default calibration targets the reference aggregate numbers:
2,016 messages per directed neighbor pair (42 per iteration x 48
iterations), waitany/allreduce time fractions of 0.60/0.30, and a peak
single-node bandwidth of about 188.7 MB/s with 10 ms bins (16 senders x
20 messages x 5,898 bytes per bin).

Iterations are globally synchronized: every rank's allreduce ends at the
iteration boundary, so the noisy waitany duration is absorbed by the
allreduce remainder. Rank 1 stays on external/runtime code while the
others sit idle in allreduce, which makes the parallelism series sweep
its full range (all ranks busy during compute, exactly one at the tail).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .clock import VirtualClock
from .config import TracerConfig
from .model import IdentityProvider, single_node_model
from .prv_format import TraceBundle
from .records import STATE_EXTERNAL, STATE_IDLE, STATE_RUNNING
from .sampler import CallstackSource, SamplerConfig, start_sampler
from .tracer import Tracer

RING = "ring"
GRID2D = "nearest-neighbor-2d"

WAITANY_VALUE = 1
ALLREDUCE_VALUE = 2

ROUTINE_LABELS = {0: "End", WAITANY_VALUE: "MPI_Waitany", ALLREDUCE_VALUE: "MPI_Allreduce"}

#: messages occupy the leading fraction of the waitany block, so they
#: always finish before the noisiest block end (noise clipped at 3 sigma)
SEND_WINDOW_FRACTION = 0.7

GENERATED_CAPTURE_TIME = datetime(2024, 7, 1, 12, 0)


@dataclass
class SyntheticSpec:
    n_tasks: int = 16
    n_iterations: int = 48
    compute_ns: int = 10_000_000
    waitany_ns: int = 60_000_000
    allreduce_ns: int = 30_000_000
    #: sigma of the multiplicative noise on the waitany duration, clipped
    #: at 3 sigma; the allreduce remainder absorbs it
    noise_sigma: float = 0.05
    #: messages to each directed neighbor, per task, per iteration
    messages_per_neighbor_pair: int = 42
    message_size: int = 5898
    flight_ns: int = 200_000
    topology: str = RING
    seed: int = 42

    @property
    def iteration_ns(self) -> int:
        return self.compute_ns + self.waitany_ns + self.allreduce_ns

    @property
    def total_ns(self) -> int:
        return self.n_iterations * self.iteration_ns

    def validate(self) -> None:
        if self.n_tasks < 1 or self.n_iterations < 1:
            raise ValueError("need at least one task and one iteration")
        if min(self.compute_ns, self.waitany_ns, self.allreduce_ns) <= 0:
            raise ValueError("phase durations must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if self.messages_per_neighbor_pair < 0 or self.message_size < 0:
            raise ValueError("message counts and sizes must be >= 0")
        if self.flight_ns <= 0:
            raise ValueError("message flight time must be positive")
        if self.topology not in (RING, GRID2D):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.messages_per_neighbor_pair > 0:
            window = int(self.waitany_ns * SEND_WINDOW_FRACTION)
            if window + self.flight_ns + 1 > self.waitany_ns + self.allreduce_ns - 1:
                raise ValueError(
                    "flight_ns too large: messages must land inside the "
                    "waitany/allreduce budget"
                )


def _grid_dims(n: int) -> tuple[int, int]:
    r = int(math.isqrt(n))
    while n % r:
        r -= 1
    return r, n // r


def neighbors_of(spec: SyntheticSpec, task: int) -> list[int]:
    """Directed neighbor tasks (1-based) of one rank."""
    n = spec.n_tasks
    if n == 1:
        return []
    i = task - 1
    if spec.topology == RING:
        out = [(i + 1) % n, (i - 1) % n]
    else:
        rows, cols = _grid_dims(n)
        r, c = divmod(i, cols)
        out = [
            ((r - 1) % rows) * cols + c,
            ((r + 1) % rows) * cols + c,
            r * cols + (c - 1) % cols,
            r * cols + (c + 1) % cols,
        ]
    seen: list[int] = []
    for j in out:
        if j != i and j not in seen:
            seen.append(j)
    return [j + 1 for j in seen]


def _waitany_durations(spec: SyntheticSpec) -> np.ndarray:
    """Per (iteration, task) waitany duration in ns, drawn once upfront."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    eta = rng.normal(1.0, spec.noise_sigma, size=(spec.n_iterations, spec.n_tasks))
    if spec.noise_sigma > 0:
        eta = np.clip(eta, 1 - 3 * spec.noise_sigma, 1 + 3 * spec.noise_sigma)
    durations = np.rint(spec.waitany_ns * eta).astype(np.int64)
    # keep the message window inside the block and the allreduce non-empty
    window = int(spec.waitany_ns * SEND_WINDOW_FRACTION)
    low = window + spec.flight_ns + 1
    high = spec.waitany_ns + spec.allreduce_ns - 1
    return np.clip(durations, low, high)


def _play_task(
    tracer: Tracer,
    clock: VirtualClock,
    spec: SyntheticSpec,
    task: int,
    waitany: np.ndarray,
    local: threading.local,
) -> None:
    local.task = task
    routine = tracer.config.routine_event_type
    peers = neighbors_of(spec, task)
    n_slots = spec.messages_per_neighbor_pair * len(peers)
    window = int(spec.waitany_ns * SEND_WINDOW_FRACTION)
    spacing = window // n_slots if n_slots else 0
    tail_state = STATE_EXTERNAL if task == 1 else STATE_IDLE

    for k in range(spec.n_iterations):
        t0 = k * spec.iteration_ns
        clock.set(t0)
        tracer.set_state(STATE_RUNNING)

        wait_begin = t0 + spec.compute_ns
        clock.set(wait_begin)
        tracer.emit(routine, WAITANY_VALUE)
        tracer.set_state(STATE_EXTERNAL)

        if n_slots:
            # one outgoing message per slot, alternating neighbors; inbound
            # completions land flight_ns after the peer's slot that targets
            # this rank (regular topology: every rank shares the slot grid)
            actions = []
            for i in range(n_slots):
                t_send = wait_begin + i * spacing + spacing // 2
                actions.append((t_send, "send", peers[i % len(peers)]))
            for peer in peers:
                pos = neighbors_of(spec, peer).index(task)
                for m in range(spec.messages_per_neighbor_pair):
                    j = pos + m * len(peers)
                    t_recv = wait_begin + j * spacing + spacing // 2 + spec.flight_ns
                    actions.append((t_recv, "recv", peer))
            actions.sort()
            for t, op, peer in actions:
                clock.set(t)
                tracer.emit_comm(op, peer, size=spec.message_size)

        wait_end = wait_begin + int(waitany[k, task - 1])
        clock.set(wait_end)
        tracer.emit(routine, ALLREDUCE_VALUE)
        tracer.set_state(tail_state)

        clock.set(t0 + spec.iteration_ns)
        tracer.emit(routine, 0)


def generate_synthetic_trace(
    spec: SyntheticSpec,
    sampler_config: SamplerConfig | None = None,
) -> TraceBundle:
    """Run the synthetic workload through the tracer and finish the bundle.

    Deterministic per spec+seed, including the header capture timestamp,
    so repeated runs write byte-identical files. Worker threads run one
    at a time; concurrency of the tracer is exercised by its own tests.
    """
    spec.validate()
    process, resources = single_node_model(spec.n_tasks)
    local = threading.local()
    provider = IdentityProvider(
        task_id_fn=lambda: getattr(local, "task", 1),
        num_tasks_fn=lambda: spec.n_tasks,
    )
    clock = VirtualClock()
    # honor event-code overrides from PRVKIT_CONFIG / environment, but keep
    # the state codes the workload script needs and manage states explicitly
    config = TracerConfig.load()
    config.initial_state = None
    config.state_table = {
        STATE_IDLE: "Idle",
        STATE_RUNNING: "Running",
        STATE_EXTERNAL: "Scheduling and Fork/Join",
        **config.state_table,
    }
    tracer = Tracer(process, resources, provider, config, clock).init()
    tracer.register(config.routine_event_type, "MPI call", dict(ROUTINE_LABELS))

    waitany = _waitany_durations(spec)
    for task in range(1, spec.n_tasks + 1):
        worker = threading.Thread(
            target=_play_task,
            args=(tracer, clock, spec, task, waitany, local),
            name=f"rank-{task}",
        )
        worker.start()
        worker.join()

    if sampler_config is not None:
        _run_demo_sampler(tracer, sampler_config, spec)

    return tracer.finish(capture_time=GENERATED_CAPTURE_TIME)


def _run_demo_sampler(tracer: Tracer, config: SamplerConfig, spec: SyntheticSpec) -> None:
    tracer.register(config.callstack_event_type, "Sampled callstack frame")
    sampler = start_sampler(tracer, config, CallstackSource(lambda: [1]))
    if config.mode == "time":
        sampler.poll(spec.total_ns)
    else:
        total_messages = (
            spec.n_tasks
            * len(neighbors_of(spec, 1))
            * spec.messages_per_neighbor_pair
            * spec.n_iterations
        )
        sampler.counter_tick(total_messages)
    sampler.stop()
