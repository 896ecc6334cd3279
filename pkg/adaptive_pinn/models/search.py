"""
Hyperparameter-search models: search spaces, trials and GA genomes.
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .network import Activation, ArchSpec

MIN_LAYERS, MAX_LAYERS = 1, 4
MIN_WIDTH, MAX_WIDTH = 1, 64


class ParamKind(str, Enum):
    LOG_REAL = "log-real"
    LINEAR_REAL = "linear-real"
    INTEGER = "integer"
    CATEGORICAL = "categorical"


class ParamDimension(BaseModel):
    """One searchable hyperparameter."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    kind: ParamKind
    low: Optional[float] = None
    high: Optional[float] = None
    choices: List[Any] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_bounds(self):
        if self.kind is ParamKind.CATEGORICAL:
            if not self.choices:
                raise ValueError(f"Categorical dimension {self.name} needs choices")
            return self
        if self.low is None or self.high is None:
            raise ValueError(f"Dimension {self.name} needs low and high bounds")
        if not (math.isfinite(self.low) and math.isfinite(self.high) and self.low < self.high):
            raise ValueError(f"Dimension {self.name}: bounds must be finite with low < high")
        if self.kind is ParamKind.LOG_REAL and self.low <= 0:
            raise ValueError(f"Log-scaled dimension {self.name} needs low > 0")
        return self

    def from_unit(self, u: float):
        """Map a coordinate in [0, 1] to a value of this dimension."""
        u = min(max(float(u), 0.0), 1.0)
        if self.kind is ParamKind.LOG_REAL:
            return float(math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low))))
        if self.kind is ParamKind.LINEAR_REAL:
            return float(self.low + u * (self.high - self.low))
        if self.kind is ParamKind.INTEGER:
            lo, hi = int(math.ceil(self.low)), int(math.floor(self.high))
            return int(min(hi, lo + math.floor(u * (hi - lo + 1))))
        return self.choices[min(len(self.choices) - 1, int(math.floor(u * len(self.choices))))]


class ParamSpace(BaseModel):
    """Product of named dimensions."""

    model_config = ConfigDict(frozen=True)

    dimensions: List[ParamDimension] = Field(..., min_length=1)

    @field_validator("dimensions")
    @classmethod
    def unique_names(cls, v):
        names = [d.name for d in v]
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate dimension names: {names}")
        return v

    @property
    def n_dims(self) -> int:
        return len(self.dimensions)

    def from_unit(self, u: np.ndarray) -> Dict[str, Any]:
        return {d.name: d.from_unit(x) for d, x in zip(self.dimensions, u)}

    def sample_unit(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.0, 1.0, size=self.n_dims)


class Trial(BaseModel):
    """One objective evaluation."""

    iteration: int = Field(..., ge=0)
    point: Dict[str, Any]
    objective: float = Field(..., description="+inf when the evaluation failed")
    failed: bool = False
    random_fallback: bool = Field(False, description="Surrogate fit failed; point drawn at random")
    wall_time: float = Field(0.0, ge=0.0)


class SearchResult(BaseModel):
    """Best trial and the full history of a search."""

    best: Trial
    history: List[Trial]

    @property
    def best_so_far(self) -> List[float]:
        curve, best = [], math.inf
        for trial in self.history:
            best = min(best, trial.objective)
            curve.append(best)
        return curve


class Genome(BaseModel):
    """Hidden-layer widths plus a learning-rate exponent."""

    model_config = ConfigDict(frozen=True)

    widths: List[int] = Field(..., min_length=MIN_LAYERS, max_length=MAX_LAYERS)
    lr_exponent: float = Field(-3.0, ge=-5.0, le=0.0, description="log10 of the learning rate")

    @field_validator("widths")
    @classmethod
    def check_widths(cls, v):
        for width in v:
            if not MIN_WIDTH <= width <= MAX_WIDTH:
                raise ValueError(f"Widths must lie in [{MIN_WIDTH}, {MAX_WIDTH}], got {v}")
        return list(v)

    @property
    def n_layers(self) -> int:
        return len(self.widths)

    @property
    def learning_rate(self) -> float:
        return 10.0 ** self.lr_exponent

    def to_arch(self, input_dim: int, activation: Activation = Activation.TANH) -> ArchSpec:
        return ArchSpec(input_dim=input_dim, hidden=self.widths, output_dim=1, activation=activation)


class GaResult(BaseModel):
    """Outcome of a genetic architecture search."""

    best: Genome
    best_fitness: float
    history: List[float] = Field(default_factory=list, description="Best fitness after each generation")
    evaluations: int = Field(0, ge=0)
