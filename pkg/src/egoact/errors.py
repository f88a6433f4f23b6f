"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: validation and configuration
problems exit 1, file format and I/O problems exit 2, solver
non-convergence exits 3.
"""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PipelineError):
    """An input violates a documented precondition."""


class ConfigError(ValidationError):
    """A configuration file or flag combination is invalid."""


class DomainError(ValidationError):
    """A numeric input lies outside the mathematical domain of an operation."""


class FormatError(PipelineError):
    """A file does not look like the expected format (bad magic or header)."""


class CorruptionError(FormatError):
    """Declared sizes in a file header disagree with the actual payload."""


class ConvergenceError(PipelineError):
    """An iterative solver exhausted its iteration budget."""
