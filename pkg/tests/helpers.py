"""Shared fixtures-in-spirit: bundle builders and independent oracles.

The oracles deliberately use brute force (point sampling, discretized
byte spreading, replay, collect-then-sort) so they stay independent of
the production code paths they check.
"""

from __future__ import annotations

from datetime import datetime

from prvkit import (
    CommRecord,
    EventRecord,
    Location,
    StateRecord,
    TraceBundle,
    single_node_model,
)
from prvkit.records import EventRegistry, STATE_IDLE

CAPTURE = datetime(2024, 3, 15, 9, 30)


def make_bundle(records, n_tasks=2, total=None, registry=None, threads_per_task=1):
    process, resources = single_node_model(n_tasks, threads_per_task)
    if total is None:
        total = 0
        for r in records:
            if isinstance(r, StateRecord):
                total = max(total, r.end)
            elif isinstance(r, EventRecord):
                total = max(total, r.time)
            else:
                total = max(total, r.physical_recv)
    return TraceBundle(
        capture_time=CAPTURE,
        total_time_ns=total,
        process=process,
        resources=resources,
        records=list(records),
        registry=registry or EventRegistry(),
    )


def loc(task, thread=1, cpu=0, appl=1):
    return Location(cpu, appl, task, thread)


def state(task, begin, end, code, thread=1):
    return StateRecord(loc(task, thread), begin, end, code)


def event(task, time, type_code, value, thread=1):
    return EventRecord(loc(task, thread), time, ((type_code, value),))


def comm(src, dst, psend, precv, size, tag=0, lsend=None, lrecv=None):
    return CommRecord(
        send_location=loc(src),
        recv_location=loc(dst),
        logical_send=psend if lsend is None else lsend,
        physical_send=psend,
        logical_recv=precv if lrecv is None else lrecv,
        physical_recv=precv,
        size=size,
        tag=tag,
    )


# ---------------------------------------------------------------------------
# oracles


def parallelism_point_sampling(bundle, bin_width, w0=0, w1=None):
    """1-ns brute-force oracle: sample the non-idle task count at every
    integer nanosecond of each bin and average."""
    if w1 is None:
        w1 = bundle.total_time_ns
    busy_per_task = {}
    for rec in bundle.records:
        if isinstance(rec, StateRecord) and rec.state != STATE_IDLE:
            busy_per_task.setdefault(
                (rec.location.appl, rec.location.task), []
            ).append((rec.begin, rec.end))

    def count_at(t):
        n = 0
        for intervals in busy_per_task.values():
            if any(b <= t < e for b, e in intervals):
                n += 1
        return n

    values = []
    start = w0
    while start < w1:
        end = min(start + bin_width, w1)
        total = sum(count_at(t) for t in range(start, end))
        values.append(total / (end - start))
        start = end
    return values


def parallelism_point_sampling_fast(bundle, bin_width, w0=0, w1=None):
    """Same 1-ns point-sampling oracle, vectorized for long traces: mark
    every nanosecond each task is busy, sum task indicators, average bins."""
    import numpy as np

    if w1 is None:
        w1 = bundle.total_time_ns
    span = w1 - w0
    busy_per_task = {}
    for rec in bundle.records:
        if isinstance(rec, StateRecord) and rec.state != STATE_IDLE:
            busy_per_task.setdefault(
                (rec.location.appl, rec.location.task), []
            ).append((rec.begin, rec.end))
    counts = np.zeros(span, dtype=np.int32)
    for intervals in busy_per_task.values():
        mask = np.zeros(span, dtype=bool)
        for b, e in intervals:
            b, e = max(b, w0), min(e, w1)
            if b < e:
                mask[b - w0 : e - w0] = True
        counts += mask
    values = []
    start = 0
    while start < span:
        end = min(start + bin_width, span)
        values.append(float(counts[start:end].mean()))
        start = end
    return values


def bandwidth_discretized(bundle, bin_width, tick=1_000):
    """Microsecond-grid oracle: walk each message's flight in `tick` steps
    and accumulate byte shares per node per bin."""
    import math

    total = bundle.total_time_ns
    n_bins = max(1, math.ceil(total / bin_width))
    n_nodes = len(bundle.resources.nodes)
    acc = [[0.0] * n_bins for _ in range(n_nodes)]
    for rec in bundle.records:
        if not isinstance(rec, CommRecord):
            continue
        nodes = {
            bundle.node_of_task(rec.send_location.appl, rec.send_location.task),
            bundle.node_of_task(rec.recv_location.appl, rec.recv_location.task),
        }
        b, e = rec.physical_send, rec.physical_recv
        if e == b:
            i = min(b // bin_width, n_bins - 1)
            for node in nodes:
                acc[node - 1][i] += rec.size
            continue
        t = b
        while t < e:
            step = min(tick, e - t)
            share = rec.size * step / (e - b)
            i = min(t // bin_width, n_bins - 1)
            for node in nodes:
                acc[node - 1][i] += share
            t += step
    return [
        [v / (bin_width / 1e9) / 1e6 for v in series] for series in acc
    ]


def replay_timeline(events_of_type, total_time):
    """Replay oracle for block pairing: (time, value) list -> intervals."""
    intervals = []
    open_block = None
    for t, v in events_of_type:
        if open_block is not None:
            intervals.append((open_block[0], t, open_block[1]))
            open_block = None
        if v != 0:
            open_block = (t, v)
    if open_block is not None:
        intervals.append((open_block[0], total_time, open_block[1]))
    return intervals


def count_messages(bundle):
    """Counting enumeration oracle for the connectivity matrix."""
    totals = {}
    for rec in bundle.records:
        if isinstance(rec, CommRecord):
            key = (rec.send_location.task, rec.recv_location.task)
            totals[key] = totals.get(key, 0) + 1
    return totals
