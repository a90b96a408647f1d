"""Trace record types and the event-type dictionary.

Three record kinds exist: states (time intervals with an activity code),
events (point annotations of (type, value) integer pairs), and
communications (one message between two locations with logical/physical
send and receive times).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RegistryConflictError
from .model import Location

STATE_IDLE = 0
STATE_RUNNING = 1
STATE_EXTERNAL = 7

#: Minimal activity table: user code, external/runtime code, or idle.
#: Code 7 keeps the label real Paraver installations expect.
DEFAULT_STATE_TABLE: dict[int, str] = {
    STATE_IDLE: "Idle",
    STATE_RUNNING: "Running",
    STATE_EXTERNAL: "Scheduling and Fork/Join",
}

KIND_STATE = 1
KIND_EVENT = 2
KIND_COMM = 3


@dataclass(frozen=True)
class StateRecord:
    location: Location
    begin: int
    end: int
    state: int

    kind = KIND_STATE


@dataclass(frozen=True)
class EventRecord:
    location: Location
    time: int
    pairs: tuple[tuple[int, int], ...]  # non-empty, type codes nonzero

    kind = KIND_EVENT


@dataclass(frozen=True)
class CommRecord:
    send_location: Location
    recv_location: Location
    logical_send: int
    physical_send: int
    logical_recv: int
    physical_recv: int
    size: int
    tag: int

    kind = KIND_COMM


TraceRecord = StateRecord | EventRecord | CommRecord


def sort_key(record: TraceRecord) -> tuple:
    """Total order used for the on-disk record stream.

    Primary keys are (time, kind, appl, task, thread) with kind ordered
    state < event < comm; the remaining fields break ties so that equal
    multisets of records always serialize identically.
    """
    if isinstance(record, StateRecord):
        loc = record.location
        return (record.begin, KIND_STATE, loc.appl, loc.task, loc.thread,
                record.end, record.state, loc.cpu)
    if isinstance(record, EventRecord):
        loc = record.location
        return (record.time, KIND_EVENT, loc.appl, loc.task, loc.thread,
                record.pairs, loc.cpu)
    loc = record.send_location
    rloc = record.recv_location
    return (record.logical_send, KIND_COMM, loc.appl, loc.task, loc.thread,
            record.physical_send, rloc.appl, rloc.task, rloc.thread,
            record.logical_recv, record.physical_recv, record.size,
            record.tag, loc.cpu, rloc.cpu)


@dataclass
class EventRegistry:
    """Maps event type codes to descriptions and value labels.

    This is the in-memory form of the semantic dictionary file; value 0
    conventionally labels the end of a block and defaults to "End".
    """

    entries: dict[int, tuple[str, dict[int, str]]] = field(default_factory=dict)
    #: type codes seen more than once while parsing a dictionary file
    duplicate_codes: list[int] = field(default_factory=list)

    def register(
        self, type_code: int, description: str, value_labels: dict[int, str] | None = None
    ) -> None:
        if type_code == 0:
            raise ValueError("event type code must be nonzero")
        labels = dict(value_labels or {})
        if type_code in self.entries:
            existing_desc, existing_labels = self.entries[type_code]
            if existing_desc != description:
                raise RegistryConflictError(
                    f"type {type_code} already registered as {existing_desc!r}, "
                    f"refusing {description!r}"
                )
            merged = dict(existing_labels)
            merged.update(labels)
            self.entries[type_code] = (description, merged)
        else:
            self.entries[type_code] = (description, labels)

    def description(self, type_code: int) -> str | None:
        entry = self.entries.get(type_code)
        return entry[0] if entry else None

    def value_label(self, type_code: int, value: int) -> str | None:
        entry = self.entries.get(type_code)
        if entry is None:
            return None
        if value in entry[1]:
            return entry[1][value]
        if value == 0:
            return "End"
        return None

    def copy(self) -> "EventRegistry":
        return EventRegistry(
            {code: (desc, dict(labels)) for code, (desc, labels) in self.entries.items()},
            list(self.duplicate_codes),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventRegistry):
            return NotImplemented
        return self.entries == other.entries
