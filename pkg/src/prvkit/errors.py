"""Exception hierarchy for prvkit."""


class PrvKitError(Exception):
    """Base class for all prvkit errors."""


class InvalidModelError(PrvKitError):
    """Process/resource model construction violated an invariant."""


class IdentityRangeError(PrvKitError):
    """An identity callback returned an id outside the model's range."""


class LifecycleError(PrvKitError):
    """Operation called in the wrong tracer lifecycle phase."""


class RegistryConflictError(PrvKitError):
    """Event type re-registered with a different description."""


class ScopeMismatchError(PrvKitError):
    """User-function exit token does not match the innermost open scope."""


class UnknownStateError(PrvKitError):
    """State code not present in the configured state table."""


class CausalityError(PrvKitError):
    """Communication receive time precedes its send time."""


class InvalidRecordError(PrvKitError):
    """Record content violates a structural invariant at emit time."""


class ParseError(PrvKitError):
    """Trace file could not be parsed.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


class EmptySeriesError(PrvKitError):
    """Analysis input contains no usable records."""


class DegenerateWindowError(PrvKitError):
    """Requested analysis window has zero or negative length."""


class SamplerLifecycleError(PrvKitError):
    """Sampler started or stopped twice, or used after stop."""


class SamplerModeError(PrvKitError):
    """Sampler operation invoked in the wrong sampling mode."""
