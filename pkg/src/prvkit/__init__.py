"""prvkit: a self-contained Paraver-style tracing toolkit.

Record states, events, and communications against the Paraver
process/resource object model, write and parse .prv/.pcf/.row trace
bundles bit-exactly, sample statistically with jitter, and reproduce
the standard trace analyses (parallelism, call timelines, connectivity,
routine fractions, node bandwidth).
"""

from .analysis import (
    CountMatrix,
    IntervalTimeline,
    RoutineStats,
    TimeSeries,
    call_timeline,
    connectivity_matrix,
    export_csv,
    instantaneous_parallelism,
    node_bandwidth,
    routine_time_fractions,
)
from .clock import MonotonicClock, VirtualClock
from .config import TracerConfig
from .errors import (
    CausalityError,
    DegenerateWindowError,
    EmptySeriesError,
    IdentityRangeError,
    InvalidModelError,
    InvalidRecordError,
    LifecycleError,
    ParseError,
    PrvKitError,
    RegistryConflictError,
    SamplerLifecycleError,
    SamplerModeError,
    ScopeMismatchError,
    UnknownStateError,
)
from .model import (
    IdentityProvider,
    Location,
    ProcessModel,
    ResourceModel,
    build_model,
    resolve_location,
    set_taskid_function,
    set_threadid_function,
    single_node_model,
)
from .prv_format import (
    TraceBundle,
    ValidationReport,
    parse_bundle,
    validate_bundle,
    write_bundle,
)
from .records import (
    CommRecord,
    EventRecord,
    EventRegistry,
    StateRecord,
    STATE_EXTERNAL,
    STATE_IDLE,
    STATE_RUNNING,
)
from .sampler import (
    CallstackSource,
    Sampler,
    SamplerConfig,
    SamplerReport,
    counter_tick,
    start_sampler,
    stop_sampler,
)
from .svg import export_svg
from .synth import SyntheticSpec, generate_synthetic_trace
from .tracer import Tracer, init

__version__ = "0.1.0"

__all__ = [
    "CallstackSource",
    "CausalityError",
    "CommRecord",
    "CountMatrix",
    "DegenerateWindowError",
    "EmptySeriesError",
    "EventRecord",
    "EventRegistry",
    "IdentityProvider",
    "IdentityRangeError",
    "IntervalTimeline",
    "InvalidModelError",
    "InvalidRecordError",
    "LifecycleError",
    "Location",
    "MonotonicClock",
    "ParseError",
    "ProcessModel",
    "PrvKitError",
    "RegistryConflictError",
    "ResourceModel",
    "RoutineStats",
    "Sampler",
    "SamplerConfig",
    "SamplerLifecycleError",
    "SamplerModeError",
    "SamplerReport",
    "ScopeMismatchError",
    "StateRecord",
    "STATE_EXTERNAL",
    "STATE_IDLE",
    "STATE_RUNNING",
    "SyntheticSpec",
    "TimeSeries",
    "TraceBundle",
    "Tracer",
    "TracerConfig",
    "UnknownStateError",
    "ValidationReport",
    "VirtualClock",
    "build_model",
    "call_timeline",
    "connectivity_matrix",
    "counter_tick",
    "export_csv",
    "export_svg",
    "generate_synthetic_trace",
    "init",
    "instantaneous_parallelism",
    "node_bandwidth",
    "parse_bundle",
    "resolve_location",
    "routine_time_fractions",
    "set_taskid_function",
    "set_threadid_function",
    "single_node_model",
    "start_sampler",
    "stop_sampler",
    "validate_bundle",
    "write_bundle",
]
