"""
Utility modules for the adaptive PINN toolkit.
"""

from .file_utils import atomic_write_text, read_json, run_digest, write_csv, write_json
from .seeding import derive_seed, make_rng, stream
from .validation import (
    AdaptivePinnError,
    ArrayValidator,
    AutodiffError,
    DataError,
    NumericalError,
    ShapeMismatchError,
    ValidationError,
)

__all__ = [
    "atomic_write_text",
    "run_digest",
    "read_json",
    "write_csv",
    "write_json",
    "derive_seed",
    "make_rng",
    "stream",
    "AdaptivePinnError",
    "ArrayValidator",
    "AutodiffError",
    "DataError",
    "NumericalError",
    "ShapeMismatchError",
    "ValidationError",
]
