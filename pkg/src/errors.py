"""
Exception hierarchy for the S-N forecasting toolkit.

InputError subclasses describe bad user input (CLI exit code 2); everything
else under SnForecastError is a runtime or numeric failure (exit code 3).
"""
from typing import Optional, Sequence


class SnForecastError(Exception):
    """Base class for every error raised by this package"""


# ---------------------------------------------------------------- input errors

class InputError(SnForecastError, ValueError):
    """Invalid argument, file or configuration supplied by the caller"""


class DomainError(InputError):
    """Value outside the mathematical domain of an operation"""


class ArgumentError(InputError):
    """Argument out of range (grid bounds, split counts, window lengths)"""


class ConfigError(InputError):
    """Invalid or unreadable configuration / curve parameter file"""


class MissingInputError(InputError):
    def __init__(self, path, what: str = "input file"):
        self.path = path
        super().__init__(f"missing {what}: {path}")


class SeriesParseError(InputError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptySeriesError(InputError):
    """Series file contains a header but no data rows"""


class ScalerError(InputError):
    """Scaler cannot be fitted (empty or constant training region)"""


class PlotInputError(InputError):
    """Plot source CSV missing or empty"""


class CheckpointError(InputError):
    """Base class for checkpoint loading problems"""


class CorruptCheckpointError(CheckpointError):
    pass


class UnsupportedCheckpointVersionError(CheckpointError):
    def __init__(self, found: int, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(
            f"checkpoint format_version {found} is not supported (max {supported})"
        )


class CheckpointShapeError(CheckpointError):
    pass


# -------------------------------------------------------------- runtime errors

class ShapeError(SnForecastError, ValueError):
    def __init__(self, op: str, *shapes):
        self.shapes = shapes
        listed = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {listed}")


class NumericError(SnForecastError, ArithmeticError):
    """Non-finite value produced by a numeric operation"""


class FitError(NumericError):
    def __init__(self, message: str, last_params: Optional[Sequence[float]] = None):
        self.last_params = None if last_params is None else tuple(float(p) for p in last_params)
        super().__init__(f"{message} (last iterate: {self.last_params})")


class TrainingDivergedError(NumericError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class OptimizerStateError(SnForecastError):
    """Optimizer moments no longer match the parameter shapes"""


class NonDeterministicClosureError(SnForecastError):
    """Loss closure returned different values for identical parameters"""


class ModelDataMismatchError(SnForecastError):
    """Checkpoint and dataset disagree on window length or scaling"""
