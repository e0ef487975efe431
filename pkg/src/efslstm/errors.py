"""Exception hierarchy shared by every stage of the pipeline."""


class EfsError(Exception):
    """Base class for all package errors."""


class UsageError(EfsError, ValueError):
    """A caller violated a documented precondition."""


class DimensionError(UsageError):
    """Array or vector sizes do not match the configured network shape."""


class DataError(EfsError, ValueError):
    """Input data cannot be used (e.g. a column with no values at all)."""


class NumericError(EfsError, ArithmeticError):
    """A forward pass produced a non-finite value."""

    def __init__(self, message: str, sample_index: int = -1):
        super().__init__(message)
        self.sample_index = sample_index


class UndefinedRatioError(EfsError, ZeroDivisionError):
    """Overfitting ratio requested with a zero test RMSE."""


class DegenerateTestError(EfsError, ArithmeticError):
    """Diebold-Mariano loss differential has no variance."""


class StageError(EfsError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
