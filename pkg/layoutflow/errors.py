"""
Exception hierarchy shared by every layoutflow module.

Errors are grouped by the CLI exit code they map to: configuration problems exit with 2,
bad inputs (boxes, prompts, manifests, shapes) exit with 3 and numerical failures exit with 4.
Outcomes that are part of normal operation (validation violations, pipeline rejections) are
returned as data and never raised.
"""

from typing import Optional

__all__ = [
    "LayoutflowError",
    "ConfigError",
    "InvalidConfig",
    "DataError",
    "DegenerateBox",
    "OutOfRange",
    "MalformedTag",
    "UnknownClass",
    "ShapeMismatch",
    "MissingBranch",
    "RejectionExhausted",
    "NoValidPlacement",
    "WeightsOffSimplex",
    "MalformedManifest",
    "ScorerFailure",
    "NumericalError",
    "NonFinite",
    "NonFiniteCost",
    "TrainingDiverged",
    "StageError",
    "exit_code_for",
]


class LayoutflowError(Exception):
    exit_code = 1


class ConfigError(LayoutflowError, ValueError):
    exit_code = 2


class InvalidConfig(ConfigError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DataError(LayoutflowError, ValueError):
    exit_code = 3


class DegenerateBox(DataError):
    pass


class OutOfRange(DataError):
    pass


class MalformedTag(DataError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnknownClass(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class MissingBranch(DataError):
    pass


class RejectionExhausted(DataError):
    pass


class NoValidPlacement(DataError):
    pass


class WeightsOffSimplex(DataError):
    pass


class MalformedManifest(DataError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class ScorerFailure(DataError):
    pass


class NumericalError(LayoutflowError, ArithmeticError):
    exit_code = 4


class NonFinite(NumericalError):
    pass


class NonFiniteCost(NumericalError):
    pass


class TrainingDiverged(NumericalError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step}: loss={loss}")
        self.step = step
        self.loss = loss


class StageError(LayoutflowError):
    """A benchmark stage failed; keeps the exit code of the underlying error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = exit_code_for(cause)


def exit_code_for(err: BaseException) -> int:
    return getattr(err, "exit_code", 1)
