"""Custom exceptions for sgru_forecast."""

from typing import Any, Dict, Optional, Sequence, Tuple


class SgruForecastError(Exception):
    """Base exception for sgru_forecast."""
    pass


class DimensionError(SgruForecastError, ValueError):
    """Raised when operand shapes do not conform for an operation."""

    def __init__(self, op: str, shapes: Sequence[Tuple[int, ...]], detail: str = ""):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        shape_text = ", ".join(str(s) for s in self.shapes)
        message = f"{op}: incompatible shapes {shape_text}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ContractError(SgruForecastError, ValueError):
    """Raised when a precondition of an operation is violated."""
    pass


class NumericError(SgruForecastError):
    """Raised when a computation produces a non-finite value."""

    def __init__(self, message: str, step: Optional[int] = None, epoch: Optional[int] = None):
        context = []
        if epoch is not None:
            context.append(f"epoch {epoch}")
        if step is not None:
            context.append(f"step {step}")
        if context:
            message = f"{message} [{', '.join(context)}]"
        super().__init__(message)
        self.step = step
        self.epoch = epoch


class ConfigError(SgruForecastError):
    """Raised when a configuration value is invalid."""

    def __init__(self, message: str, field: Optional[str] = None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class SchemaError(SgruForecastError):
    """Raised when an input CSV does not match the declared columns."""

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message)
        self.column = column


class SizingError(SgruForecastError):
    """Raised when a split plan needs more rows than the data provides."""

    def __init__(self, message: str, required: int, available: int):
        super().__init__(f"{message}: requires {required} rows, {available} available")
        self.required = required
        self.available = available


class CheckpointError(SgruForecastError):
    """Raised when a checkpoint file is corrupt or truncated."""
    pass


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint was written with an unsupported format version."""

    def __init__(self, found: int, expected: int):
        super().__init__(f"Unsupported checkpoint format version {found} (expected {expected})")
        self.found = found
        self.expected = expected


class CompatibilityError(SgruForecastError):
    """Raised when checkpoint dimensions disagree with the run configuration."""

    def __init__(self, checkpoint_dims: Dict[str, Any], config_dims: Dict[str, Any]):
        super().__init__(
            f"Checkpoint dimensions {checkpoint_dims} do not match configuration {config_dims}"
        )
        self.checkpoint_dims = checkpoint_dims
        self.config_dims = config_dims


class UndefinedMetricError(SgruForecastError):
    """Raised when nrmse is undefined because the true series has zero mean."""

    def __init__(self, rmse: float):
        super().__init__(f"nrmse undefined for zero-mean target (rmse={rmse:.6g})")
        self.rmse = rmse
