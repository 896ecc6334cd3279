"""
Report and run-configuration models.
"""

import math
from enum import Enum
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid

from ..config import settings
from .dataset import SynthDomain


class MetricSummary(BaseModel):
    """MAPE with its per-point absolute percentage errors."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mape: float = Field(..., ge=0.0)
    errors: np.ndarray

    def within_margin(self, margin: float = 0.08) -> float:
        """Fraction of points whose relative error is at most ``margin``."""
        return float(np.mean(self.errors <= margin))


class CvSummary(BaseModel):
    """k-fold cross-validation result."""

    k: int = Field(..., ge=2)
    mean: float
    std: float = Field(..., ge=0.0)
    fold_mapes: List[float]


class RobustnessReport(BaseModel):
    """Monte Carlo validation metrics of one model."""

    model: str
    max_var_pred: float = Field(..., ge=0.0, description="Normalized-target units")
    max_var_pred_raw: float = Field(..., ge=0.0, description="Raw target units")
    max_var_mape: float = Field(..., ge=0.0)
    avg_epochs: float = Field(..., ge=0.0)
    trials: int = Field(..., ge=0)
    failures: int = Field(0, ge=0)
    mean_mape: float = Field(math.nan)


class UTestMethod(str, Enum):
    EXACT = "exact"
    NORMAL_APPROX = "normal-approx"


class UTestResult(BaseModel):
    """Two-sided Mann-Whitney U test."""

    u: float = Field(..., ge=0.0, description="U statistic of the first sample")
    p_value: float = Field(..., gt=0.0, le=1.0)
    method: UTestMethod
    n1: int = Field(..., ge=1)
    n2: int = Field(..., ge=1)

    @model_validator(mode="after")
    def check_range(self):
        if self.u > self.n1 * self.n2:
            raise ValueError(f"U={self.u} exceeds n1*n2={self.n1 * self.n2}")
        return self


class KdeCurve(BaseModel):
    """Gaussian kernel density estimate on a grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float = Field(..., gt=0.0)

    def integral(self) -> float:
        return float(trapezoid(self.density, self.grid))


class HistogramBin(BaseModel):
    low: float
    high: float
    count: int = Field(..., ge=0)


class RowStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"


class BenchmarkRow(BaseModel):
    """One model of the benchmark table."""

    model: str
    median_mape: float = math.nan
    mapes: List[float] = Field(default_factory=list)
    status: RowStatus = RowStatus.OK
    detail: str = ""


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

class DataSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Optional[str] = Field(None, description="Source-domain CSV (synthetic water analog when absent)")
    target: Optional[str] = Field(None, description="Target-domain CSV (synthetic sodium analog when absent)")
    target_column: Optional[str] = None
    domain: Optional[SynthDomain] = Field(None, description="Synthetic domain; gen-data writes both when absent")
    n_points: Optional[int] = Field(None, ge=2)
    source_points: Optional[int] = Field(None, ge=2)
    noise: float = Field(0.05, ge=0.0, lt=1.0)
    holdout_fraction: float = Field(0.2, gt=0.0, lt=1.0)


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    arch: str = "3-[20,20,12]-1"
    activation: str = "tanh"
    mode: str = "pinn"
    problem: str = "nusselt-smoothness"
    n_collocation: int = Field(64, ge=1)
    boundary_weight: Optional[float] = Field(None, ge=0.0)
    derivative_mode: str = "taylor"


class TrainSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(settings.LEARNING_RATE, gt=0.0)
    max_epochs: int = Field(settings.MAX_EPOCHS, ge=1)
    early_stop_patience: int = Field(settings.EARLY_STOP_PATIENCE, ge=1)
    val_fraction: float = Field(settings.VAL_FRACTION, gt=0.0, lt=1.0)
    decay_factor: float = Field(1.0, gt=0.0, le=1.0)
    decay_every: int = Field(1, ge=1)
    alternate: bool = False


class TransferSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    checkpoint: Optional[str] = None
    layers: List[int] = Field(default_factory=lambda: [0])
    freeze: bool = True
    soft_freeze: bool = False
    fine_tune_alpha: bool = True
    sweep: bool = False
    sweep_seeds: int = Field(5, ge=1)


class HyperoptSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: str = "bayes"
    target: str = "svr"
    budget: int = Field(30, ge=1)
    n_init: int = Field(5, ge=2)
    folds: int = Field(5, ge=2)
    population: int = Field(12, ge=4)
    generations: int = Field(10, ge=1)


class EvalSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trials: int = Field(settings.MC_TRIALS, ge=2)
    seeds: int = Field(5, ge=1)
    folds: int = Field(10, ge=2)
    models: Optional[List[str]] = Field(None, description="Model subset (command default when absent)")
    svr_c: float = Field(27.23, gt=0.0)
    svr_gamma: float = Field(0.0007, gt=0.0)
    svr_epsilon: float = Field(0.0031, ge=0.0)
    gp_gamma: float = Field(0.5, gt=0.0)
    gp_noise: float = Field(1e-4, ge=0.0)
    search_budget: int = Field(20, ge=3)
    train_report: Optional[str] = Field(None, description="Training-report CSV whose lambda_p trace is histogrammed")


class RunConfig(BaseModel):
    """Everything needed to replay a command."""

    model_config = ConfigDict(extra="forbid")

    command: Optional[str] = None
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    output_dir: Optional[Path] = None
    preset: Optional[str] = None
    data: DataSection = Field(default_factory=DataSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    transfer: TransferSection = Field(default_factory=TransferSection)
    hyperopt: HyperoptSection = Field(default_factory=HyperoptSection)
    eval: EvalSection = Field(default_factory=EvalSection)
