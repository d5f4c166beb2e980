"""
Error types for ocleval.

Every error raised on purpose by the engine derives from OclEvalError and
carries the process exit code main.py should use for it.
"""

from typing import Optional


class OclEvalError(Exception):
    """Base class for all ocleval errors."""

    exit_code = 4


class ConfigError(OclEvalError, ValueError):
    """Invalid experiment or command configuration."""

    exit_code = 2

    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class DataError(OclEvalError):
    """Problem with stream data on disk."""

    exit_code = 3


class StreamFormatError(DataError):
    """A stream file does not follow the on-disk format."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class StreamValidationError(DataError):
    """A stream record is well formed but violates the data model."""

    def __init__(self, message: str, record_index: int):
        self.record_index = record_index
        super().__init__(f"record {record_index}: {message}")


class ContractViolation(OclEvalError, ValueError):
    """A kernel was called outside its preconditions."""


class StepRangeError(ContractViolation, IndexError):
    """Step index outside the stream."""


class EmptyBufferError(ContractViolation):
    """Sampling was requested from an empty replay buffer."""


class EmptyMemoryError(ContractViolation):
    """kNN prediction was requested before anything was stored."""


class EmptyHistoryError(ContractViolation):
    """Blind prediction was requested before any label was revealed."""


class NormalizationError(ContractViolation):
    """A zero-norm vector cannot be unit-normalized."""


class ExperimentError(OclEvalError):
    """A failure inside the evaluate-then-train loop."""

    def __init__(self, step: int, cause: BaseException):
        self.step = step
        self.cause = cause
        super().__init__(f"experiment failed at step {step}: {cause}")
        # Keep the component's exit code when it has one
        if isinstance(cause, OclEvalError):
            self.exit_code = cause.exit_code
