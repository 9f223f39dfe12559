"""Exception taxonomy, mapped to CLI exit codes."""


class PipelineError(Exception):
    """Base class for all pipeline failures."""

    exit_code = 1


class ConfigError(PipelineError):
    """Invalid configuration, parameters, or preconditions."""

    exit_code = 2


class DataError(PipelineError):
    """Unreadable, malformed, or inconsistent input data."""

    exit_code = 3


class PgmError(DataError):
    """Malformed PGM payload; message names the byte offset."""


class ManifestError(DataError):
    """Malformed manifest CSV; message names the line number."""


class EvaluationError(DataError):
    """Degenerate inputs to a metric computation."""


class BackendError(PipelineError):
    """External classifier backend failed or violated the bridge protocol."""

    exit_code = 4
