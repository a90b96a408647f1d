"""Writer, parser, and validator for Paraver trace bundles.

A bundle is three sibling files sharing a basename:

    basename.prv   record stream, one ASCII line per record
    basename.pcf   semantic dictionary (state and event type labels)
    basename.row   display names per object level

The .prv grammar (all numbers unsigned decimal, times in nanoseconds):

    header  #Paraver (dd/mm/yy at hh:mm):FTIME_ns:NNODES(c1,c2,...):NAPPL:APPL...
            with each APPL = NTASKS(nthreads1:node1,nthreads2:node2,...)
    state   1:cpu:appl:task:thread:begin:end:state
    event   2:cpu:appl:task:thread:time:type:value[:type:value]*
    comm    3:cpu_s:appl_s:task_s:thread_s:lsend:psend:
              cpu_r:appl_r:task_r:thread_r:lrecv:precv:size:tag

Records are written sorted by (time, kind, appl, task, thread) with the
remaining fields as tiebreakers, so writing is deterministic: the same
bundle always produces byte-identical files.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .errors import ParseError
from .model import Application, Location, Node, ProcessModel, ResourceModel, Task
from .records import (
    CommRecord,
    DEFAULT_STATE_TABLE,
    EventRecord,
    EventRegistry,
    StateRecord,
    TraceRecord,
    sort_key,
)

log = logging.getLogger("prvkit")

ROW_LEVELS = ("THREAD", "TASK", "NODE")


def default_row_labels(
    process: ProcessModel, resources: ResourceModel
) -> dict[str, list[str]]:
    return {
        "THREAD": [f"THREAD {a}.{t}.{th}" for a, t, th in process.iter_threads()],
        "TASK": [f"TASK {a}.{t}" for a, t in process.iter_tasks()],
        "NODE": [f"node{i}" for i in range(1, len(resources.nodes) + 1)],
    }


@dataclass
class TraceBundle:
    """Header metadata, ordered records, dictionary, and row labels."""

    capture_time: datetime
    total_time_ns: int
    process: ProcessModel
    resources: ResourceModel
    records: list[TraceRecord]
    registry: EventRegistry = field(default_factory=EventRegistry)
    state_table: dict[int, str] = field(
        default_factory=lambda: dict(DEFAULT_STATE_TABLE)
    )
    row_labels: dict[str, list[str]] = field(default_factory=dict)
    #: send/recv halves left unpaired at finish; diagnostic only, never
    #: serialized and excluded from bundle equality
    unmatched_comms: list = field(default_factory=list)

    def __post_init__(self):
        self.capture_time = self.capture_time.replace(second=0, microsecond=0)
        self.records = sorted(self.records, key=sort_key)
        defaults = default_row_labels(self.process, self.resources)
        for level, names in defaults.items():
            self.row_labels.setdefault(level, names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TraceBundle):
            return NotImplemented
        return (
            self.capture_time == other.capture_time
            and self.total_time_ns == other.total_time_ns
            and self.process == other.process
            and self.resources == other.resources
            and self.records == other.records
            and self.registry == other.registry
            and self.state_table == other.state_table
            and self.row_labels == other.row_labels
        )

    def node_of_task(self, appl: int, task: int) -> int:
        return self.process.task(appl, task).node_index


# --------------------------------------------------------------------------
# writing


def _format_header(bundle: TraceBundle) -> str:
    stamp = bundle.capture_time.strftime("%d/%m/%y at %H:%M")
    cpus = ",".join(str(n.cpu_count) for n in bundle.resources.nodes)
    appls = []
    for appl in bundle.process.applications:
        tasks = ",".join(f"{t.thread_count}:{t.node_index}" for t in appl.tasks)
        appls.append(f"{len(appl.tasks)}({tasks})")
    return (
        f"#Paraver ({stamp}):{bundle.total_time_ns}_ns"
        f":{len(bundle.resources.nodes)}({cpus})"
        f":{len(bundle.process.applications)}:" + ":".join(appls)
    )


def format_record(record: TraceRecord) -> str:
    if isinstance(record, StateRecord):
        l = record.location
        return f"1:{l.cpu}:{l.appl}:{l.task}:{l.thread}:{record.begin}:{record.end}:{record.state}"
    if isinstance(record, EventRecord):
        l = record.location
        pairs = ":".join(f"{t}:{v}" for t, v in record.pairs)
        return f"2:{l.cpu}:{l.appl}:{l.task}:{l.thread}:{record.time}:{pairs}"
    s, r = record.send_location, record.recv_location
    return (
        f"3:{s.cpu}:{s.appl}:{s.task}:{s.thread}:{record.logical_send}:{record.physical_send}"
        f":{r.cpu}:{r.appl}:{r.task}:{r.thread}:{record.logical_recv}:{record.physical_recv}"
        f":{record.size}:{record.tag}"
    )


def _pcf_text(bundle: TraceBundle) -> str:
    lines: list[str] = []
    lines.append("STATES")
    for code in sorted(bundle.state_table):
        lines.append(f"{code}    {bundle.state_table[code]}")
    lines.append("")

    entries = dict(bundle.registry.entries)
    # Event types emitted without registration still get a dictionary entry
    # so every code in the trace can be labeled.
    used = {
        t for rec in bundle.records if isinstance(rec, EventRecord) for t, _ in rec.pairs
    }
    for code in sorted(used - entries.keys()):
        log.warning("event type %d was never registered; autogenerating label", code)
        entries[code] = (f"Unregistered type {code}", {})

    for code in sorted(entries):
        desc, labels = entries[code]
        lines.append("EVENT_TYPE")
        lines.append(f"0    {code}    {desc}")
        if labels:
            lines.append("VALUES")
            for value in sorted(labels):
                lines.append(f"{value}    {labels[value]}")
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def _row_text(bundle: TraceBundle) -> str:
    extra = sorted(k for k in bundle.row_labels if k not in ROW_LEVELS)
    lines: list[str] = []
    for level in (*ROW_LEVELS, *extra):
        names = bundle.row_labels.get(level, [])
        lines.append(f"LEVEL {level} SIZE {len(names)}")
        lines.extend(names)
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def write_bundle(bundle: TraceBundle, basename: str | Path, check: bool = True) -> None:
    """Write basename.prv/.pcf/.row; raises on a bundle that fails validation."""
    if check:
        report = validate_bundle(bundle)
        if not report.ok:
            raise ValueError(
                f"refusing to write invalid bundle: {report.violations[0].message}"
                + (f" (+{len(report.violations) - 1} more)" if len(report.violations) > 1 else "")
            )
    base = Path(basename)
    prv_lines = [_format_header(bundle)]
    prv_lines.extend(format_record(r) for r in sorted(bundle.records, key=sort_key))
    base.with_suffix(".prv").write_text("\n".join(prv_lines) + "\n", encoding="utf-8")
    base.with_suffix(".pcf").write_text(_pcf_text(bundle), encoding="utf-8")
    base.with_suffix(".row").write_text(_row_text(bundle), encoding="utf-8")


# --------------------------------------------------------------------------
# parsing

_HEADER_RE = re.compile(
    r"^#Paraver \((\d{2})/(\d{2})/(\d{2,4}) at (\d{2}):(\d{2})\):"
    r"(\d+)(?:_ns)?:(\d+)\(([\d,]*)\):(\d+)((?::\d+\([\d:,]*\))*)$"
)
_APPL_RE = re.compile(r":(\d+)\(([\d:,]*)\)")


def _parse_int(text: str, line: int, what: str = "field") -> int:
    if not text.isdigit():
        raise ParseError(f"non-numeric {what} {text!r}", line)
    return int(text)


def _parse_header(line: str) -> tuple[datetime, int, ProcessModel, ResourceModel]:
    m = _HEADER_RE.match(line)
    if m is None:
        raise ParseError("malformed header", 1)
    day, month, year, hour, minute = (int(g) for g in m.groups()[:5])
    if year < 100:
        year += 2000
    try:
        stamp = datetime(year, month, day, hour, minute)
    except ValueError as exc:
        raise ParseError(f"malformed header date: {exc}", 1) from None
    ftime = int(m.group(6))

    cpus = m.group(8)
    nodes = tuple(Node(int(c)) for c in cpus.split(",") if c)
    if len(nodes) != int(m.group(7)):
        raise ParseError(
            f"header declares {m.group(7)} nodes but lists {len(nodes)} cpu counts", 1
        )

    appl_section = m.group(10)
    applications = []
    for appl_m in _APPL_RE.finditer(appl_section):
        ntasks, task_list = int(appl_m.group(1)), appl_m.group(2)
        tasks = []
        for part in task_list.split(","):
            if not part:
                continue
            nth, node = part.split(":")
            tasks.append(Task(int(nth), int(node)))
        if len(tasks) != ntasks:
            raise ParseError(
                f"application declares {ntasks} tasks but lists {len(tasks)}", 1
            )
        applications.append(Application(tuple(tasks)))
    if len(applications) != int(m.group(9)):
        raise ParseError(
            f"header declares {m.group(9)} applications but lists {len(applications)}", 1
        )
    return stamp, ftime, ProcessModel(tuple(applications)), ResourceModel(nodes)


def _parse_record(line: str, lineno: int) -> TraceRecord:
    fields = line.split(":")
    kind = fields[0]
    if kind == "1":
        if len(fields) != 8:
            raise ParseError(
                f"state record needs 8 fields, got {len(fields)}", lineno
            )
        cpu, appl, task, thread, begin, end, state = (
            _parse_int(f, lineno) for f in fields[1:]
        )
        return StateRecord(Location(cpu, appl, task, thread), begin, end, state)
    if kind == "2":
        if len(fields) < 8 or len(fields) % 2 != 0:
            raise ParseError(
                f"event record needs 6 + 2k fields, got {len(fields)}", lineno
            )
        cpu, appl, task, thread, time = (_parse_int(f, lineno) for f in fields[1:6])
        raw = [_parse_int(f, lineno) for f in fields[6:]]
        pairs = tuple(zip(raw[0::2], raw[1::2]))
        return EventRecord(Location(cpu, appl, task, thread), time, pairs)
    if kind == "3":
        if len(fields) != 15:
            raise ParseError(
                f"comm record needs 15 fields, got {len(fields)}", lineno
            )
        vals = [_parse_int(f, lineno) for f in fields[1:]]
        send = Location(*vals[0:4])
        recv = Location(*vals[6:10])
        return CommRecord(send, recv, vals[4], vals[5], vals[10], vals[11], vals[12], vals[13])
    raise ParseError(f"unknown record type {kind}", lineno)


def _parse_pcf(text: str) -> tuple[EventRegistry, dict[int, str]]:
    registry = EventRegistry()
    state_table: dict[int, str] = {}
    section = None
    current_types: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        word = line.split()[0]
        if word == "STATES":
            section, current_types = "states", []
            continue
        if word == "EVENT_TYPE":
            section, current_types = "types", []
            continue
        if word == "VALUES":
            section = "values"
            continue
        if word.isupper() and not word[0].isdigit() and len(line.split()) <= 2:
            # unknown section such as DEFAULT_OPTIONS or STATES_COLOR
            section, current_types = None, []
            continue
        if section == "states":
            parts = line.split(None, 1)
            if len(parts) == 2 and parts[0].isdigit():
                state_table[int(parts[0])] = parts[1]
        elif section == "types":
            parts = line.split(None, 2)
            if len(parts) >= 3 and parts[0].isdigit() and parts[1].isdigit():
                code = int(parts[1])
                if code in registry.entries:
                    registry.duplicate_codes.append(code)
                else:
                    registry.entries[code] = (parts[2], {})
                    current_types.append(code)
        elif section == "values":
            parts = line.split(None, 1)
            if len(parts) == 2 and parts[0].isdigit():
                for code in current_types:
                    desc, labels = registry.entries[code]
                    labels[int(parts[0])] = parts[1]
    return registry, state_table


def _parse_row(text: str) -> dict[str, list[str]]:
    labels: dict[str, list[str]] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if (
            len(parts) == 4
            and parts[0] == "LEVEL"
            and parts[2] == "SIZE"
            and parts[3].isdigit()
        ):
            level, size = parts[1], int(parts[3])
            size = min(size, len(lines) - i - 1)  # tolerate truncated files
            labels[level] = [lines[i + 1 + k] for k in range(size)]
            i += 1 + size
        else:
            i += 1
    return labels


def parse_bundle(basename: str | Path) -> TraceBundle:
    """Parse basename.prv (+ optional .pcf/.row) back into a TraceBundle.

    Missing dictionary or label files are tolerated with a warning; a
    malformed record line raises ParseError carrying its line number.
    """
    base = Path(basename)
    prv = base.with_suffix(".prv")
    try:
        text = prv.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise ParseError(f"cannot read {prv}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty trace file", 1)

    stamp, ftime, process, resources = _parse_header(lines[0])
    records: list[TraceRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        records.append(_parse_record(line.strip(), lineno))

    registry, state_table = EventRegistry(), dict(DEFAULT_STATE_TABLE)
    pcf = base.with_suffix(".pcf")
    if pcf.exists():
        registry, parsed_states = _parse_pcf(pcf.read_text(encoding="utf-8", errors="replace"))
        if parsed_states:
            state_table = parsed_states
    else:
        log.warning("%s missing; continuing with an empty event dictionary", pcf)

    row = base.with_suffix(".row")
    row_labels: dict[str, list[str]] = {}
    if row.exists():
        row_labels = _parse_row(row.read_text(encoding="utf-8", errors="replace"))
    else:
        log.warning("%s missing; continuing with default row labels", row)

    return TraceBundle(
        capture_time=stamp,
        total_time_ns=ftime,
        process=process,
        resources=resources,
        records=records,
        registry=registry,
        state_table=state_table,
        row_labels=row_labels,
    )


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, message: str) -> None:
        self.violations.append(Violation(kind, message))

    def __str__(self) -> str:
        if self.ok:
            return "bundle valid"
        return "\n".join(f"[{v.kind}] {v.message}" for v in self.violations)


def _check_location(
    report: ValidationReport, bundle: TraceBundle, loc: Location, where: str
) -> None:
    if not bundle.process.contains(loc.appl, loc.task, loc.thread):
        report.add(
            "location-out-of-range",
            f"{where}: location out of range "
            f"(appl={loc.appl}, task={loc.task}, thread={loc.thread})",
        )
    if loc.cpu > bundle.resources.total_cpus:
        report.add(
            "location-out-of-range",
            f"{where}: cpu {loc.cpu} exceeds system total {bundle.resources.total_cpus}",
        )


def validate_bundle(bundle: TraceBundle) -> ValidationReport:
    """Structural validation; never raises on content, returns a report."""
    report = ValidationReport()
    total = bundle.total_time_ns
    n_nodes = len(bundle.resources.nodes)
    for a, t in bundle.process.iter_tasks():
        node = bundle.process.task(a, t).node_index
        if not 1 <= node <= n_nodes:
            report.add(
                "node-ref",
                f"task {a}.{t} maps to node {node}, but only {n_nodes} node(s) declared",
            )
    for i, rec in enumerate(bundle.records):
        where = f"record {i}"
        if isinstance(rec, StateRecord):
            _check_location(report, bundle, rec.location, where)
            if rec.begin > rec.end:
                report.add("state-order", f"{where}: state begin {rec.begin} > end {rec.end}")
            if rec.end > total or rec.begin < 0:
                report.add("time-range", f"{where}: state [{rec.begin},{rec.end}) outside [0,{total}]")
        elif isinstance(rec, EventRecord):
            _check_location(report, bundle, rec.location, where)
            if not rec.pairs:
                report.add("event-pairs", f"{where}: event with no (type, value) pairs")
            if any(t == 0 for t, _ in rec.pairs):
                report.add("event-pairs", f"{where}: event type code 0")
            if any(v < 0 for _, v in rec.pairs):
                report.add("event-pairs", f"{where}: negative event value")
            if rec.time > total or rec.time < 0:
                report.add("time-range", f"{where}: event time {rec.time} outside [0,{total}]")
        else:
            _check_location(report, bundle, rec.send_location, f"{where} (send)")
            _check_location(report, bundle, rec.recv_location, f"{where} (recv)")
            if rec.physical_recv < rec.physical_send:
                report.add(
                    "comm-causality",
                    f"{where}: physical receive {rec.physical_recv} precedes send {rec.physical_send}",
                )
            if rec.logical_send > rec.physical_send:
                report.add("comm-causality", f"{where}: logical send after physical send")
            if rec.logical_recv > rec.physical_recv:
                report.add("comm-causality", f"{where}: logical receive after physical receive")
            if rec.size < 0:
                report.add("comm-size", f"{where}: negative message size")
            times = (rec.logical_send, rec.physical_send, rec.logical_recv, rec.physical_recv)
            if max(times) > total or min(times) < 0:
                report.add("time-range", f"{where}: comm times outside [0,{total}]")
    for code in bundle.registry.duplicate_codes:
        report.add("pcf-duplicate", f"event type {code} defined more than once in dictionary")
    for half in bundle.unmatched_comms:
        report.add("comm-unmatched", f"unmatched communication half: {half}")
    return report
