"""Exception types shared across the toolkit."""
from __future__ import annotations


class IdeaError(Exception):
    """Base class for every error this package raises on purpose."""


class ValidationError(IdeaError):
    """A type invariant or configuration constraint was violated."""


class FormatError(IdeaError):
    """An embedding file could not be decoded.

    Carries the offending file path and the byte offset of the field that
    failed validation, so corrupt files can be inspected with a hex dump.
    """

    def __init__(self, path, offset: int, detail: str):
        self.path = str(path)
        self.offset = int(offset)
        self.detail = detail
        super().__init__(f"{self.path}: {detail} (byte offset {self.offset})")


class ShapeError(IdeaError):
    """Operands have missing, empty, or inconsistent dimensions."""


class DegenerateRowError(IdeaError):
    """A row with (near-)zero norm cannot be normalized."""

    def __init__(self, row: int, norm: float):
        self.row = int(row)
        self.norm = float(norm)
        super().__init__(f"row {self.row} has near-zero norm {self.norm:.3e}")


class CardinalityError(IdeaError):
    """A class does not hold the required number of samples."""


class LabelError(IdeaError):
    """A label lies outside the valid class range."""


class CorruptStateError(IdeaError):
    """Trainable parameters contain non-finite values."""


class DivergenceError(IdeaError):
    """Training produced a non-finite loss or parameter update."""


class InputError(IdeaError):
    """An operation received an empty or otherwise unusable input."""


class StageError(IdeaError):
    """An experiment stage failed; wraps the cause with stage context."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")
