"""Tracer and sampler configuration.

Configuration comes from an optional key/value file plus two environment
variables. The file format is one ``key = value`` assignment per line;
blank lines and ``#`` comments are ignored. Recognized keys:

    user_function_type = 60000019
    routine_event_type = 50000001
    state.<code> = <label>           # one per state-table entry
    sample.period_ns = 1000000
    sample.jitter = 0.2
    sample.counter_threshold = 1000

Environment variables PRVKIT_USER_FUNCTION_TYPE and
PRVKIT_ROUTINE_EVENT_TYPE override the corresponding file keys.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .records import DEFAULT_STATE_TABLE

#: Event type for user-function scoping; value = function id, 0 = exit.
#: Follows the published instrumentation convention so real Paraver
#: installations label our traces out of the box.
DEFAULT_USER_FUNCTION_TYPE = 60000019

#: Event type for routine-call blocks (MPI-call style); value 0 = outside.
DEFAULT_ROUTINE_EVENT_TYPE = 50000001

ENV_USER_FUNCTION_TYPE = "PRVKIT_USER_FUNCTION_TYPE"
ENV_ROUTINE_EVENT_TYPE = "PRVKIT_ROUTINE_EVENT_TYPE"
ENV_CONFIG = "PRVKIT_CONFIG"


def parse_kv_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


@dataclass
class TracerConfig:
    user_function_type: int = DEFAULT_USER_FUNCTION_TYPE
    routine_event_type: int = DEFAULT_ROUTINE_EVENT_TYPE
    state_table: dict[int, str] = field(
        default_factory=lambda: dict(DEFAULT_STATE_TABLE)
    )
    #: State opened automatically for a thread's first record; None leaves
    #: state management entirely to explicit set_state calls.
    initial_state: int | None = 1

    @classmethod
    def load(cls, path: str | None = None, env: bool = True) -> "TracerConfig":
        """Build a config from an optional file plus environment overrides."""
        cfg = cls()
        if path is None and env:
            path = os.environ.get(ENV_CONFIG) or None
        if path:
            raw = parse_kv_file(path)
            if "user_function_type" in raw:
                cfg.user_function_type = int(raw["user_function_type"])
            if "routine_event_type" in raw:
                cfg.routine_event_type = int(raw["routine_event_type"])
            states = {
                int(k.split(".", 1)[1]): v
                for k, v in raw.items()
                if k.startswith("state.")
            }
            if states:
                cfg.state_table = states
        if env:
            if os.environ.get(ENV_USER_FUNCTION_TYPE):
                cfg.user_function_type = int(os.environ[ENV_USER_FUNCTION_TYPE])
            if os.environ.get(ENV_ROUTINE_EVENT_TYPE):
                cfg.routine_event_type = int(os.environ[ENV_ROUTINE_EVENT_TYPE])
        return cfg
