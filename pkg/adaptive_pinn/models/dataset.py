"""
Dataset models: feature/target containers, normalization statistics and
synthetic-data specifications.
"""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import settings

NUSSELT_TARGET = "nu"


class NormStats(BaseModel):
    """Per-column feature standardization statistics (population stddev)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray = Field(..., description="Per-column mean")
    std: np.ndarray = Field(..., description="Per-column population stddev")

    @field_validator("mean", "std", mode="before")
    @classmethod
    def as_vector(cls, v):
        return np.atleast_1d(np.asarray(v, dtype=float))

    @model_validator(mode="after")
    def check_std(self):
        if self.mean.shape != self.std.shape:
            raise ValueError(f"mean/std length mismatch: {self.mean.shape} vs {self.std.shape}")
        if not np.all(self.std > 0):
            raise ValueError("Normalization stddev must be positive")
        return self

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Standardize raw features."""
        return (np.asarray(features, dtype=float) - self.mean) / self.std

    def invert(self, features: np.ndarray) -> np.ndarray:
        """Map standardized features back to raw units."""
        return np.asarray(features, dtype=float) * self.std + self.mean


class TargetStats(BaseModel):
    """Target z-scoring statistics."""

    model_config = ConfigDict(frozen=True)

    mean: float
    std: float = Field(..., gt=0)

    def apply(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def invert(self, values):
        return np.asarray(values, dtype=float) * self.std + self.mean


class Dataset(BaseModel):
    """Feature matrix plus target vector, with optional normalization records."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: np.ndarray = Field(..., description="[N x D] feature matrix")
    targets: np.ndarray = Field(..., description="[N] target vector")
    column_names: List[str] = Field(..., description="Feature column names")
    target_name: str = Field(NUSSELT_TARGET, description="Target column name")
    units: List[str] = Field(default_factory=list, description="Physical units per feature column")
    norm: Optional[NormStats] = Field(None, description="Feature normalization applied, if any")
    target_stats: Optional[TargetStats] = Field(None, description="Target standardization applied, if any")
    clean_targets: Optional[np.ndarray] = Field(None, description="Noise-free targets (synthetic data only)")
    domain: Optional[str] = Field(None, description="Synthetic domain tag")

    @field_validator("features", mode="before")
    @classmethod
    def as_matrix(cls, v):
        array = np.asarray(v, dtype=float)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        return array

    @field_validator("targets", "clean_targets", mode="before")
    @classmethod
    def as_vector(cls, v):
        if v is None:
            return v
        return np.asarray(v, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def check_consistency(self):
        n_rows, n_cols = self.features.shape
        if n_rows < 1:
            raise ValueError("Dataset needs at least one row")
        if n_cols < 1:
            raise ValueError("Dataset needs at least one feature column")
        if self.targets.shape[0] != n_rows:
            raise ValueError(f"Target count {self.targets.shape[0]} does not match row count {n_rows}")
        if len(self.column_names) != n_cols:
            raise ValueError(f"{len(self.column_names)} column names for {n_cols} feature columns")
        if self.units and len(self.units) != n_cols:
            raise ValueError(f"{len(self.units)} unit strings for {n_cols} feature columns")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.targets)):
            raise ValueError("Dataset contains NaN or Inf entries")
        if self.clean_targets is not None and self.clean_targets.shape[0] != n_rows:
            raise ValueError("clean_targets length does not match row count")
        if self.target_name == NUSSELT_TARGET and self.target_stats is None and not np.all(self.targets > 0):
            raise ValueError("Nusselt-number targets must be strictly positive")
        return self

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def raw_targets(self) -> np.ndarray:
        """Targets in physical units (undoing target standardization)."""
        if self.target_stats is None:
            return self.targets
        return self.target_stats.invert(self.targets)


class SynthDomain(str, Enum):
    """Synthetic heat-transfer domains."""

    WATER = "water"
    SODIUM = "sodium"


class FeatureRange(BaseModel):
    """Sampling range of one synthetic input column."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    low: float
    high: float
    units: str = "-"

    @model_validator(mode="after")
    def check_range(self):
        if not np.isfinite(self.low) or not np.isfinite(self.high) or not self.low < self.high:
            raise ValueError(f"Degenerate range for {self.name}: [{self.low}, {self.high}]")
        return self


# Both domains share three columns so layer-0 weights are shape-compatible for transfer.
DEFAULT_RANGES = {
    SynthDomain.WATER: [
        FeatureRange(name="re", low=1.0e4, high=1.0e5),
        FeatureRange(name="pr", low=2.0, high=7.0),
        FeatureRange(name="ar", low=1.0, high=10.0),
    ],
    SynthDomain.SODIUM: [
        FeatureRange(name="pe", low=100.0, high=1000.0),
        FeatureRange(name="pr", low=0.004, high=0.01),
        FeatureRange(name="ar", low=1.0, high=10.0),
    ],
}

DEFAULT_POINTS = {SynthDomain.WATER: settings.SOURCE_POINTS, SynthDomain.SODIUM: settings.TARGET_POINTS}

REQUIRED_COLUMNS = {SynthDomain.WATER: ("re", "pr"), SynthDomain.SODIUM: ("pe",)}


class SynthSpec(BaseModel):
    """Specification of a correlation-based synthetic dataset."""

    model_config = ConfigDict(frozen=True)

    domain: SynthDomain
    n_points: int = Field(..., ge=2)
    ranges: List[FeatureRange] = Field(..., min_length=1)
    noise_stddev: float = Field(0.0, ge=0.0, lt=1.0, description="Relative multiplicative noise")
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def check_columns(self):
        names = [r.name for r in self.ranges]
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate feature names: {names}")
        missing = [c for c in REQUIRED_COLUMNS[self.domain] if c not in names]
        if missing:
            raise ValueError(f"{self.domain.value} analog requires columns {missing}")
        return self

    @classmethod
    def default(
        cls,
        domain: SynthDomain,
        n_points: Optional[int] = None,
        noise_stddev: float = 0.0,
        seed: int = 0,
    ) -> "SynthSpec":
        """Spec with the default ranges and size for a domain."""
        domain = SynthDomain(domain)
        return cls(
            domain=domain,
            n_points=DEFAULT_POINTS[domain] if n_points is None else n_points,
            ranges=list(DEFAULT_RANGES[domain]),
            noise_stddev=noise_stddev,
            seed=seed,
        )
