"""
Error types and validation utilities shared by the toolkit.
"""

import math
from typing import Any, Iterable, Optional, Sequence

import numpy as np


class AdaptivePinnError(Exception):
    """Base error; ``exit_code`` is what the CLI returns when it escapes."""

    exit_code = 1
    kind = "error"


class ValidationError(AdaptivePinnError):
    """Invalid argument or violated precondition."""

    exit_code = 1
    kind = "usage"


class ShapeMismatchError(ValidationError):
    """Architecture, layer or vector shapes do not line up."""


class DataError(AdaptivePinnError):
    """Unreadable or malformed dataset / checkpoint file."""

    exit_code = 2
    kind = "data"


class NumericalError(AdaptivePinnError):
    """Non-finite loss or gradient, factorization failure, non-convergence."""

    exit_code = 3
    kind = "numerical"


class AutodiffError(NumericalError):
    """Domain error while evaluating a differentiation graph."""

    def __init__(self, message: str, node: Optional[str] = None):
        self.node = node
        super().__init__(f"{message} (at {node})" if node else message)


class ArrayValidator:
    """Validation helpers for numeric inputs."""

    @staticmethod
    def finite(values: Any, what: str) -> np.ndarray:
        """
        Convert to a float array and reject NaN / Inf entries.

        Args:
            values: Array-like input
            what: Name used in the error message

        Returns:
            Float array
        """
        array = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(array)):
            bad = np.argwhere(~np.isfinite(array))[0]
            raise ValidationError(f"{what} contains a non-finite entry at index {tuple(int(i) for i in bad)}")
        return array

    @staticmethod
    def same_length(a: Sequence, b: Sequence, what: str):
        """Reject sequences of different lengths."""
        if len(a) != len(b):
            raise ShapeMismatchError(f"{what}: length mismatch ({len(a)} vs {len(b)})")

    @staticmethod
    def positive(value: float, what: str) -> float:
        """Reject non-positive or non-finite scalars."""
        if not math.isfinite(value) or value <= 0:
            raise ValidationError(f"{what} must be positive and finite, got {value}")
        return float(value)

    @staticmethod
    def fraction(value: float, what: str) -> float:
        """Reject values outside the open unit interval."""
        if not 0.0 < value < 1.0:
            raise ValidationError(f"{what} must lie in (0, 1), got {value}")
        return float(value)

    @staticmethod
    def indices(values: Iterable[int], upper: int, what: str) -> list:
        """Check that every index lies in ``[0, upper)``."""
        checked = []
        for index in values:
            if not 0 <= int(index) < upper:
                raise ValidationError(f"{what}: index {index} outside [0, {upper})")
            checked.append(int(index))
        return checked
