"""
Exception hierarchy for the fault toolkit.

Argument errors raised by the module contracts are plain ``ValueError``;
the classes below cover data problems and pipeline failures.
"""
from typing import Optional


class FaultKitError(Exception):
    """Base class for all toolkit errors."""


class DataError(FaultKitError, ValueError):
    """Input data is invalid (non-finite values, empty files, bad labels)."""


class ParseError(DataError):
    """A data file could not be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ModelFormatError(DataError):
    """A serialized model or shapelet document is unreadable."""


class ShapeletDiscoveryError(FaultKitError):
    """No shapelet candidate reached the information-gain floor."""


class TuningError(FaultKitError):
    """Objective evaluation failed during hyperparameter search."""

    def __init__(self, message: str, params: Optional[dict] = None):
        self.params = params or {}
        super().__init__(message)


class StageError(FaultKitError):
    """A pipeline stage failed; carries the stage name and CLI exit code."""

    def __init__(self, stage: str, exit_code: int, message: str):
        self.stage = stage
        self.exit_code = exit_code
        super().__init__(f"[{stage}] {message}")
