"""In-process recording engine.

Lifecycle is strictly init -> record -> finish. Each OS thread appends
to its own buffer, so emit/set_state/user-function scoping need no lock
on the hot path; finish (which requires external quiescence) merges the
buffers, closes open states and scopes, matches leftover communication
halves, and produces a TraceBundle.
"""

from __future__ import annotations

import threading
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime

from .clock import MonotonicClock
from .config import TracerConfig
from .errors import (
    CausalityError,
    InvalidRecordError,
    LifecycleError,
    ScopeMismatchError,
    UnknownStateError,
)
from .model import (
    IdentityProvider,
    Location,
    ProcessModel,
    ResourceModel,
    resolve_location,
)
from .records import CommRecord, EventRecord, EventRegistry, StateRecord
from .prv_format import TraceBundle

UNINITIALIZED = "uninitialized"
ACTIVE = "active"
FINISHED = "finished"

SEND = "send"
RECV = "recv"  # receive completion; this side finalizes the record


class ScopeToken:
    """Opaque handle returned by user_function_enter."""

    __slots__ = ("ctx", "function_id", "prev_state", "location")

    def __init__(self, ctx, function_id, prev_state, location):
        self.ctx = ctx
        self.function_id = function_id
        self.prev_state = prev_state
        self.location = location


class _ThreadContext:
    """Recording buffer owned by one OS thread (or one sampler)."""

    __slots__ = ("records", "open_state", "scopes")

    def __init__(self):
        self.records = []
        self.open_state = None  # (state_code, begin_ns, Location)
        self.scopes: list[ScopeToken] = []


@dataclass(frozen=True)
class _CommHalf:
    direction: str
    location: Location
    logical: int
    physical: int
    size: int | None
    tag: int
    peer_task: int


class Tracer:
    """Recording handle over one process/resource model pair."""

    def __init__(
        self,
        process: ProcessModel,
        resources: ResourceModel,
        provider: IdentityProvider | None = None,
        config: TracerConfig | None = None,
        clock=None,
    ):
        self.process = process
        self.resources = resources
        self.provider = provider or IdentityProvider()
        self.config = config or TracerConfig()
        self.clock = clock or MonotonicClock()
        self.lifecycle = UNINITIALIZED
        self.registry = EventRegistry()
        self._registry_lock = threading.Lock()
        self._contexts: list[_ThreadContext] = []
        self._ctx_lock = threading.Lock()
        self._local = threading.local()
        self._epoch = 0
        self._comm_lock = threading.Lock()
        self._pending_sends: dict[tuple, deque] = {}
        self._pending_recvs: dict[tuple, deque] = {}
        self._comms: list[CommRecord] = []
        self.active_sampler = None

    # -- lifecycle ----------------------------------------------------------

    def init(self) -> "Tracer":
        if self.lifecycle != UNINITIALIZED:
            raise LifecycleError(f"init called on {self.lifecycle} tracer")
        self.provider.bind()
        self._epoch = self.clock.now_ns()
        self.lifecycle = ACTIVE
        self._context()  # opens the initial state for the calling thread
        return self

    def now(self) -> int:
        return self.clock.now_ns() - self._epoch

    def _require_active(self, op: str) -> None:
        if self.lifecycle != ACTIVE:
            raise LifecycleError(f"{op} requires an active tracer, not {self.lifecycle}")

    def _location(self) -> Location:
        return resolve_location(self.provider, self.process)

    def _new_context(self, open_state: bool = True) -> _ThreadContext:
        ctx = _ThreadContext()
        with self._ctx_lock:
            self._contexts.append(ctx)
        if open_state and self.config.initial_state is not None:
            ctx.open_state = (self.config.initial_state, self.now(), self._location())
        return ctx

    def _context(self) -> _ThreadContext:
        ctx = getattr(self._local, "ctx", None)
        if ctx is None:
            ctx = self._new_context()
            self._local.ctx = ctx
        return ctx

    def finish(self, capture_time: datetime | None = None) -> TraceBundle:
        """Close every open state and scope, merge buffers, build the bundle.

        No other tracer call may run concurrently with finish.
        """
        if self.lifecycle != ACTIVE:
            raise LifecycleError(f"finish called on {self.lifecycle} tracer")
        trace_end = self.now()
        for ctx in self._contexts:
            for rec in ctx.records:
                if isinstance(rec, StateRecord):
                    trace_end = max(trace_end, rec.end)
                else:
                    trace_end = max(trace_end, rec.time)
            if ctx.open_state is not None:
                trace_end = max(trace_end, ctx.open_state[1])
        for comm in self._comms:
            trace_end = max(trace_end, comm.physical_recv, comm.physical_send)

        records = []
        for ctx in self._contexts:
            records.extend(ctx.records)
            # balance any scopes the program left open
            while ctx.scopes:
                token = ctx.scopes.pop()
                records.append(
                    EventRecord(
                        token.location,
                        trace_end,
                        ((self.config.user_function_type, 0),),
                    )
                )
            if ctx.open_state is not None:
                code, begin, loc = ctx.open_state
                records.append(StateRecord(loc, begin, trace_end, code))
                ctx.open_state = None
        records.extend(self._comms)

        unmatched = [
            half for q in self._pending_sends.values() for half in q
        ] + [half for q in self._pending_recvs.values() for half in q]

        self.lifecycle = FINISHED
        with self._registry_lock:
            registry = self.registry.copy()
        return TraceBundle(
            capture_time=capture_time or datetime.now(),
            total_time_ns=trace_end,
            process=self.process,
            resources=self.resources,
            records=records,
            registry=registry,
            state_table=dict(self.config.state_table),
            unmatched_comms=unmatched,
        )

    # -- events -------------------------------------------------------------

    def register(
        self, type_code: int, description: str, value_labels: dict[int, str] | None = None
    ) -> None:
        self._require_active("register")
        with self._registry_lock:
            self.registry.register(type_code, description, value_labels)

    def emit(self, type_code: int, value: int) -> None:
        """Append one (type, value) point annotation at the current time."""
        self._require_active("emit")
        if type_code == 0:
            raise InvalidRecordError("event type code must be nonzero")
        if value < 0:
            raise InvalidRecordError("event values are unsigned")
        self._emit_pairs(((type_code, value),))

    def _emit_pairs(self, pairs, at_time: int | None = None, ctx: _ThreadContext | None = None):
        self._require_active("emit")
        ctx = ctx or self._context()
        t = self.now() if at_time is None else at_time
        ctx.records.append(EventRecord(self._location(), t, tuple(pairs)))

    # -- states ---------------------------------------------------------------

    def set_state(self, state_code: int) -> None:
        """Close the current state segment at now and open a new one."""
        self._require_active("set_state")
        if state_code not in self.config.state_table:
            raise UnknownStateError(f"state code {state_code} not in state table")
        ctx = self._context()
        t = self.now()
        if ctx.open_state is not None:
            code, begin, loc = ctx.open_state
            ctx.records.append(StateRecord(loc, begin, t, code))
        ctx.open_state = (state_code, t, self._location())

    # -- user-function scoping ------------------------------------------------

    def user_function_enter(self, function_id: int) -> ScopeToken:
        self._require_active("user_function_enter")
        ctx = self._context()
        t = self.now()
        loc = self._location()
        ctx.records.append(
            EventRecord(loc, t, ((self.config.user_function_type, function_id),))
        )
        prev = None
        if ctx.open_state is not None:
            code, begin, sloc = ctx.open_state
            ctx.records.append(StateRecord(sloc, begin, t, code))
            prev = code
        ctx.open_state = (1, t, loc)
        token = ScopeToken(ctx, function_id, prev, loc)
        ctx.scopes.append(token)
        return token

    def user_function_exit(self, token: ScopeToken) -> None:
        self._require_active("user_function_exit")
        ctx = self._context()
        if not ctx.scopes or ctx.scopes[-1] is not token:
            raise ScopeMismatchError(
                "exit token does not match the innermost open user-function scope"
            )
        ctx.scopes.pop()
        t = self.now()
        loc = self._location()
        ctx.records.append(EventRecord(loc, t, ((self.config.user_function_type, 0),)))
        if ctx.open_state is not None:
            code, begin, sloc = ctx.open_state
            ctx.records.append(StateRecord(sloc, begin, t, code))
        ctx.open_state = (token.prev_state, t, loc) if token.prev_state is not None else None

    @contextmanager
    def user_function(self, function_id: int):
        """Scope a user-coded region: enter on entry, exit on leave."""
        token = self.user_function_enter(function_id)
        try:
            yield
        finally:
            self.user_function_exit(token)

    # -- communications ---------------------------------------------------------

    def emit_comm(
        self,
        direction: str,
        peer: Location | int,
        size: int | None = None,
        tag: int = 0,
        logical_ns: int | None = None,
        physical_ns: int | None = None,
    ) -> None:
        """Record one half of a message; a matched pair yields a CommRecord.

        Halves match FIFO per (sender task, receiver task, tag). The side
        that completes the pair finalizes the record. logical defaults to
        physical, physical to the current time. Halves left unmatched at
        finish surface through validate_bundle rather than being dropped.
        """
        self._require_active("emit_comm")
        if direction not in (SEND, RECV, "recv-completion"):
            raise ValueError(f"direction must be 'send' or 'recv', got {direction!r}")
        if direction == "recv-completion":
            direction = RECV
        if size is not None and size < 0:
            raise InvalidRecordError("message size must be >= 0")
        here = self._location()
        if isinstance(peer, int):
            peer = Location(0, 1, peer, 1)
        physical = self.now() if physical_ns is None else physical_ns
        logical = physical if logical_ns is None else logical_ns
        half = _CommHalf(direction, here, logical, physical, size, tag, peer.task)

        if direction == SEND:
            key = (here.task, peer.task, tag)
            own, other = self._pending_sends, self._pending_recvs
        else:
            key = (peer.task, here.task, tag)
            own, other = self._pending_recvs, self._pending_sends
        with self._comm_lock:
            queue = other.get(key)
            if queue:
                mate = queue.popleft()
                send, recv = (half, mate) if direction == SEND else (mate, half)
                self._comms.append(self._finalize_comm(send, recv))
            else:
                own.setdefault(key, deque()).append(half)

    def _finalize_comm(self, send: _CommHalf, recv: _CommHalf) -> CommRecord:
        if recv.physical < send.physical:
            raise CausalityError(
                f"receive at {recv.physical} precedes send at {send.physical}"
            )
        if send.size is not None and recv.size is not None and send.size != recv.size:
            raise InvalidRecordError(
                f"message size mismatch: send {send.size} vs recv {recv.size}"
            )
        size = send.size if send.size is not None else recv.size
        if size is None:
            raise InvalidRecordError("message size missing on both halves")
        return CommRecord(
            send_location=send.location,
            recv_location=recv.location,
            logical_send=send.logical,
            physical_send=send.physical,
            logical_recv=recv.logical,
            physical_recv=recv.physical,
            size=size,
            tag=send.tag,
        )


def init(
    process: ProcessModel,
    resources: ResourceModel,
    provider: IdentityProvider | None = None,
    config: TracerConfig | None = None,
    clock=None,
) -> Tracer:
    """Construct and activate a tracer in one call."""
    return Tracer(process, resources, provider, config, clock).init()
