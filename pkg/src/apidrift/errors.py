"""Exception types shared across the toolchain."""


class ApidriftError(Exception):
    """Base class for all toolchain errors."""


class CorpusNotFoundError(ApidriftError):
    """The corpus root directory does not exist."""


class EmptyCorpusError(ApidriftError):
    """No level directories found in the requested range."""


class ExtractionError(ApidriftError):
    """A source file could not be processed; the scan records it and continues."""

    def __init__(self, message: str, file: str = ""):
        super().__init__(message)
        self.file = file


class SignatureParseError(ApidriftError):
    """A signature string does not follow the angle-bracket format."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class InternalConsistencyError(ApidriftError):
    """An invariant that should have been established upstream was violated."""


class InputError(ApidriftError):
    """Caller passed inconsistent or malformed arguments."""


class ValidationError(ApidriftError):
    """A knowledge-base entry or record failed validation."""


class ConfigurationError(ApidriftError):
    """Run configuration is unusable (bad flag combination, short demo bank, ...)."""


class MalformedOutputError(ApidriftError):
    """A model response did not contain the required answer grammar."""


class BackendTransportError(ApidriftError):
    """A single backend request failed; retryable."""


class BackendUnavailableError(ApidriftError):
    """The backend kept failing after bounded retries."""


class ManifestParseError(ApidriftError):
    """The app manifest is not well-formed XML."""


class ManifestMissingError(ApidriftError):
    """No manifest found under the app root."""


class BenchmarkSchemaError(ApidriftError):
    """A benchmark line violates the documented schema."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class InsufficientDataError(ApidriftError):
    """Not enough pairable annotation values to compute agreement."""


class UndefinedMetricError(ApidriftError):
    """The metric is undefined on this input (for example no gold positives)."""
