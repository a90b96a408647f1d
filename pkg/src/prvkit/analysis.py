"""Trace analyses: parallelism, call timelines, connectivity, routine
fractions, and node bandwidth, plus CSV export.

All analyses are pure functions over an immutable bundle: the same
bundle and parameters always produce identical output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWindowError, EmptySeriesError
from .prv_format import TraceBundle
from .records import CommRecord, EventRecord, StateRecord, STATE_IDLE


@dataclass
class TimeSeries:
    bin_width: int
    origin: int
    values: list[float]
    label: str
    units: str

    def bin_start(self, i: int) -> int:
        return self.origin + i * self.bin_width


@dataclass
class IntervalTimeline:
    """Per (appl, task, thread): ordered non-overlapping labeled intervals."""

    event_type: int
    rows: dict[tuple[int, int, int], list[tuple[int, int, int, str]]]
    #: rows whose last block was still open at trace end and got closed there
    truncated: list[tuple[int, int, int]] = field(default_factory=list)

    def codes(self) -> list[int]:
        return sorted({c for row in self.rows.values() for _, _, c, _ in row})


@dataclass
class CountMatrix:
    counts: np.ndarray  # n x n, sender row, receiver column
    labels: list[str]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class RoutineStats:
    """Per routine code: one time fraction per task, with spread across tasks."""

    event_type: int
    window: tuple[int, int]
    task_labels: list[str]
    fractions: dict[int, list[float]]
    labels: dict[int, str]

    def mean(self, code: int) -> float:
        return float(np.mean(self.fractions[code]))

    def min(self, code: int) -> float:
        return float(np.min(self.fractions[code]))

    def max(self, code: int) -> float:
        return float(np.max(self.fractions[code]))

    def quartiles(self, code: int) -> tuple[float, float]:
        q = np.percentile(self.fractions[code], [25, 75])
        return float(q[0]), float(q[1])


# --------------------------------------------------------------------------
# helpers


def _merge_intervals(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Union of half-open intervals."""
    merged: list[list[int]] = []
    for b, e in sorted(intervals):
        if e <= b:
            continue
        if merged and b <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([b, e])
    return [(b, e) for b, e in merged]


def _task_index(bundle: TraceBundle) -> dict[tuple[int, int], int]:
    return {at: i for i, at in enumerate(bundle.process.iter_tasks())}


def _clip(b: int, e: int, w0: int, w1: int) -> tuple[int, int]:
    return max(b, w0), min(e, w1)


def _nonidle_intervals_per_task(bundle: TraceBundle) -> dict[int, list[tuple[int, int]]]:
    """Union over each task's threads of its non-idle state segments."""
    raw: dict[int, list[tuple[int, int]]] = {}
    index = _task_index(bundle)
    for rec in bundle.records:
        if isinstance(rec, StateRecord) and rec.state != STATE_IDLE:
            key = index.get((rec.location.appl, rec.location.task))
            if key is not None:
                raw.setdefault(key, []).append((rec.begin, rec.end))
    return {task: _merge_intervals(iv) for task, iv in raw.items()}


def _routine_intervals_per_task(
    bundle: TraceBundle, event_type: int
) -> dict[int, list[tuple[int, int]]]:
    timeline = call_timeline(bundle, event_type)
    index = _task_index(bundle)
    raw: dict[int, list[tuple[int, int]]] = {}
    for (appl, task, _), row in timeline.rows.items():
        key = index[(appl, task)]
        raw.setdefault(key, []).extend((b, e) for b, e, _, _ in row)
    return {task: _merge_intervals(iv) for task, iv in raw.items()}


def _integrate_step(
    deltas: dict[int, int], w0: int, w1: int, bin_width: int
) -> list[float]:
    """Time-weighted average per bin of the step function given by deltas.

    Exact piecewise integration: the function is constant between
    breakpoints, so each (segment x bin) overlap contributes
    count * overlap nanoseconds, all in integer arithmetic.
    """
    n_bins = math.ceil((w1 - w0) / bin_width)
    acc = [0] * n_bins
    count = 0
    prev = w0
    for t in sorted(deltas):
        clipped = min(t, w1)
        if clipped > prev:
            if count != 0:
                _spread(acc, prev, clipped, count, w0, bin_width)
            prev = clipped
        if t >= w1:
            break
        count += deltas[t]
    if prev < w1 and count != 0:
        _spread(acc, prev, w1, count, w0, bin_width)

    values = []
    for i in range(n_bins):
        start = w0 + i * bin_width
        span = min(bin_width, w1 - start)
        values.append(acc[i] / span)
    return values


def _spread(acc: list[int], b: int, e: int, weight: int, origin: int, bin_width: int) -> None:
    i = (b - origin) // bin_width
    while b < e:
        bin_end = origin + (i + 1) * bin_width
        step = min(e, bin_end) - b
        acc[i] += weight * step
        b += step
        i += 1


# --------------------------------------------------------------------------
# analyses


def instantaneous_parallelism(
    bundle: TraceBundle,
    bin_width_ns: int,
    window: tuple[int, int] | None = None,
    derive_from_event_type: int | None = None,
) -> TimeSeries:
    """Time-weighted average count of tasks in a non-idle state per bin.

    A task counts as non-idle while any of its threads is in a state
    other than Idle(0). With derive_from_event_type set, state records
    are ignored and a task is instead considered idle exactly while
    inside a routine block of that event type; tasks with no routine
    events stay out of the count.
    """
    if bin_width_ns <= 0:
        raise ValueError("bin width must be positive")
    w0, w1 = window or (0, bundle.total_time_ns)
    if w1 <= w0:
        raise DegenerateWindowError(f"window [{w0},{w1}) is empty")

    if derive_from_event_type is not None:
        busy = {}
        routine = _routine_intervals_per_task(bundle, derive_from_event_type)
        for task, blocks in routine.items():
            gaps, cursor = [], 0
            for b, e in blocks:
                if b > cursor:
                    gaps.append((cursor, b))
                cursor = max(cursor, e)
            if cursor < bundle.total_time_ns:
                gaps.append((cursor, bundle.total_time_ns))
            busy[task] = gaps
    else:
        busy = _nonidle_intervals_per_task(bundle)
        if not any(isinstance(r, StateRecord) for r in bundle.records):
            raise EmptySeriesError("bundle has no state records")

    deltas: dict[int, int] = {}
    for intervals in busy.values():
        for b, e in intervals:
            b, e = _clip(b, e, w0, w1)
            if b < e:
                deltas[b] = deltas.get(b, 0) + 1
                deltas[e] = deltas.get(e, 0) - 1
    values = _integrate_step(deltas, w0, w1, bin_width_ns)
    return TimeSeries(bin_width_ns, w0, values, "instantaneous parallelism", "tasks")


def call_timeline(bundle: TraceBundle, event_type: int) -> IntervalTimeline:
    """Pair consecutive events of one type into per-row interval blocks.

    A nonzero value opens a block that the next event of the same type
    closes (back-to-back calls chain); value 0 closes without opening.
    A block still open at trace end closes there and flags its row.
    """
    occurrences: dict[tuple[int, int, int], list[tuple[int, int]]] = {}
    for rec in bundle.records:
        if isinstance(rec, EventRecord):
            for t_code, value in rec.pairs:
                if t_code == event_type:
                    row = (rec.location.appl, rec.location.task, rec.location.thread)
                    occurrences.setdefault(row, []).append((rec.time, value))
    if not occurrences:
        raise EmptySeriesError(f"no events of type {event_type} in bundle")

    timeline = IntervalTimeline(event_type, {})
    for row, seq in occurrences.items():
        intervals = []
        open_block: tuple[int, int] | None = None
        for t, value in seq:
            if open_block is not None:
                b, v = open_block
                intervals.append((b, t, v, _value_label(bundle, event_type, v)))
                open_block = None
            if value != 0:
                open_block = (t, value)
        if open_block is not None:
            b, v = open_block
            intervals.append(
                (b, bundle.total_time_ns, v, _value_label(bundle, event_type, v))
            )
            timeline.truncated.append(row)
        timeline.rows[row] = intervals
    return timeline


def _value_label(bundle: TraceBundle, event_type: int, value: int) -> str:
    return bundle.registry.value_label(event_type, value) or f"value {value}"


def connectivity_matrix(bundle: TraceBundle) -> CountMatrix:
    """Count of messages sent from task x to task y."""
    index = _task_index(bundle)
    n = len(index)
    counts = np.zeros((n, n), dtype=np.int64)
    for rec in bundle.records:
        if isinstance(rec, CommRecord):
            x = index[(rec.send_location.appl, rec.send_location.task)]
            y = index[(rec.recv_location.appl, rec.recv_location.task)]
            counts[x, y] += 1
    labels = bundle.row_labels.get("TASK") or [f"TASK {a}.{t}" for a, t in index]
    return CountMatrix(counts, list(labels[:n]))


def routine_time_fractions(
    bundle: TraceBundle, event_type: int, window: tuple[int, int] | None = None
) -> RoutineStats:
    """Fraction of the analyzed window each task spends in each routine.

    For multi-threaded tasks the per-task fraction is the summed block
    time across threads over window x thread_count, keeping it in [0,1].
    """
    w0, w1 = window or (0, bundle.total_time_ns)
    if w1 <= w0:
        raise DegenerateWindowError(f"window [{w0},{w1}) is empty")
    timeline = call_timeline(bundle, event_type)
    index = _task_index(bundle)
    n = len(index)

    durations: dict[int, list[int]] = {}
    for (appl, task, _), row in timeline.rows.items():
        key = index[(appl, task)]
        for b, e, code, _ in row:
            b, e = _clip(b, e, w0, w1)
            if b < e:
                durations.setdefault(code, [0] * n)[key] += e - b

    fractions = {}
    labels = {}
    for code, per_task in sorted(durations.items()):
        denom = [
            (w1 - w0) * bundle.process.task(a, t).thread_count for a, t in index
        ]
        fractions[code] = [d / dn for d, dn in zip(per_task, denom)]
        labels[code] = _value_label(bundle, event_type, code)
    task_labels = bundle.row_labels.get("TASK") or [f"TASK {a}.{t}" for a, t in index]
    return RoutineStats(event_type, (w0, w1), list(task_labels[:n]), fractions, labels)


def node_bandwidth(bundle: TraceBundle, bin_width_ns: int) -> list[TimeSeries]:
    """Per-node series of network bandwidth in MB/s (MB = 10^6 bytes).

    Each message's bytes spread uniformly over its flight interval
    [physical_send, physical_recv); a zero-duration message lands whole
    in its containing bin. A message touches the nodes of both its
    sender and receiver task; intra-node messages count once.
    """
    if bin_width_ns <= 0:
        raise ValueError("bin width must be positive")
    total = bundle.total_time_ns
    n_bins = max(1, math.ceil(total / bin_width_ns)) if total > 0 else 1
    n_nodes = len(bundle.resources.nodes)
    per_node = [np.zeros(n_bins) for _ in range(n_nodes)]

    for rec in bundle.records:
        if not isinstance(rec, CommRecord):
            continue
        nodes = {
            bundle.node_of_task(rec.send_location.appl, rec.send_location.task),
            bundle.node_of_task(rec.recv_location.appl, rec.recv_location.task),
        }
        b, e = rec.physical_send, rec.physical_recv
        if e == b:
            i = min(b // bin_width_ns, n_bins - 1)
            for node in nodes:
                per_node[node - 1][i] += rec.size
            continue
        flight = e - b
        cursor, i = b, b // bin_width_ns
        while cursor < e:
            bin_end = (i + 1) * bin_width_ns
            step = min(e, bin_end) - cursor
            share = rec.size * (step / flight)
            for node in nodes:
                per_node[node - 1][min(i, n_bins - 1)] += share
            cursor += step
            i += 1

    seconds = bin_width_ns / 1e9
    return [
        TimeSeries(
            bin_width_ns,
            0,
            [float(v) / seconds / 1e6 for v in series],
            f"node{i + 1}",
            "MB/s",
        )
        for i, series in enumerate(per_node)
    ]


# --------------------------------------------------------------------------
# CSV export


def export_csv(result, path: str) -> None:
    """Write any analysis result as a CSV table with a stable column order."""
    with open(path, "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        if isinstance(result, TimeSeries):
            writer.writerow(["bin_start_s", result.label])
            for i, v in enumerate(result.values):
                writer.writerow([result.bin_start(i) / 1e9, v])
        elif isinstance(result, list) and all(isinstance(s, TimeSeries) for s in result):
            writer.writerow(["bin_start_s"] + [s.label for s in result])
            for i in range(len(result[0].values) if result else 0):
                writer.writerow(
                    [result[0].bin_start(i) / 1e9] + [s.values[i] for s in result]
                )
        elif isinstance(result, IntervalTimeline):
            writer.writerow(["appl", "task", "thread", "begin_ns", "end_ns", "code", "label"])
            for row in sorted(result.rows):
                for b, e, code, label in result.rows[row]:
                    writer.writerow([*row, b, e, code, label])
        elif isinstance(result, CountMatrix):
            writer.writerow(["sender\\receiver"] + result.labels)
            for i, label in enumerate(result.labels):
                writer.writerow([label] + [int(c) for c in result.counts[i]])
        elif isinstance(result, RoutineStats):
            writer.writerow(
                ["code", "label", "mean", "min", "max", "p25", "p75"]
                + result.task_labels
            )
            for code in sorted(result.fractions):
                q25, q75 = result.quartiles(code)
                writer.writerow(
                    [
                        code,
                        result.labels[code],
                        result.mean(code),
                        result.min(code),
                        result.max(code),
                        q25,
                        q75,
                    ]
                    + result.fractions[code]
                )
        else:
            raise TypeError(f"cannot export {type(result).__name__} as CSV")
