"""
Training models: optimizer configuration, loss breakdowns, per-epoch records
and transfer plans.
"""

import math
from enum import Enum
from pathlib import Path
from typing import List, Optional, Set

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TrainMode(str, Enum):
    """What the loss contains."""

    DATA_ONLY = "data-only"
    PINN = "pinn"


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    STEP_DECAY = "step-decay"


class Schedule(BaseModel):
    """Learning-rate schedule: constant or ``base * factor ** (epoch // every)``."""

    model_config = ConfigDict(frozen=True)

    kind: ScheduleKind = ScheduleKind.CONSTANT
    factor: float = Field(1.0, gt=0.0, le=1.0, description="Decay factor per step")
    every: int = Field(1, ge=1, description="Epochs between decay steps")

    @classmethod
    def step_decay(cls, factor: float, every: int) -> "Schedule":
        return cls(kind=ScheduleKind.STEP_DECAY, factor=factor, every=every)


class TrainConfig(BaseModel):
    """Optimizer and stopping configuration for one training run."""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    max_epochs: int = Field(5000, ge=1)
    schedule: Schedule = Field(default_factory=Schedule)
    early_stop_patience: int = Field(200, ge=1)
    val_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0, lt=2**64)
    mode: TrainMode = TrainMode.DATA_ONLY
    alternate: bool = Field(False, description="Alternate data / physics epochs instead of joint minimization")
    standardize_targets: bool = Field(True, description="Train on z-scored targets")


class BlendWeights(BaseModel):
    """
    Data / physics loss weights; they sum to one.

    Both lie strictly inside (0, 1) until the sigmoid saturates in double
    precision (|alpha| above ~36).
    """

    model_config = ConfigDict(frozen=True)

    lambda_d: float = Field(..., ge=0.0, le=1.0)
    lambda_p: float = Field(..., ge=0.0, le=1.0)


class LossBreakdown(BaseModel):
    """Components of the blended loss at one evaluation."""

    model_config = ConfigDict(frozen=True)

    data_loss: float = Field(..., ge=0.0)
    physics_loss: float = Field(..., ge=0.0)
    weights: BlendWeights
    total: float = Field(..., ge=0.0)


class AdamState(BaseModel):
    """First/second moment estimates and step count."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    m: np.ndarray
    v: np.ndarray
    t: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_lengths(self):
        if self.m.shape != self.v.shape:
            raise ValueError(f"Moment shapes differ: {self.m.shape} vs {self.v.shape}")
        return self

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), t=0)


class EpochRecord(BaseModel):
    """One row of the training trace."""

    epoch: int = Field(..., ge=1)
    total_loss: float
    data_loss: float
    physics_loss: float = 0.0
    lambda_p: Optional[float] = None
    val_mape: float
    lr: float


class TrainReport(BaseModel):
    """Outcome of one training run."""

    epochs: List[EpochRecord] = Field(default_factory=list)
    n_epochs: int = Field(0, ge=0)
    best_epoch: int = Field(0, ge=0)
    best_val_mape: float = math.inf
    val_metric: str = Field("mape", description="'mape', or 'mse' when a validation target is zero")
    stopped_early: bool = False
    alpha_final: Optional[float] = None
    alpha_reinitialized: bool = False
    target_mean: float = Field(0.0, description="Target shift the network output is trained against")
    target_std: float = Field(1.0, gt=0.0, description="Target scale the network output is trained against")
    wall_time: float = Field(0.0, ge=0.0, description="Seconds; not written to report files")

    @property
    def lambda_p_trace(self) -> List[float]:
        return [r.lambda_p for r in self.epochs if r.lambda_p is not None]


class TransferPlan(BaseModel):
    """Which source layers initialize the target network and how they train."""

    model_config = ConfigDict(frozen=True)

    source_checkpoint: Optional[Path] = None
    layers_to_copy: Set[int] = Field(default_factory=set)
    freeze_copied: bool = True
    soft_freeze: bool = Field(False, description="Train copied layers at 0.1x learning rate instead of freezing")
    fine_tune_alpha: bool = True

    @field_validator("layers_to_copy")
    @classmethod
    def non_negative(cls, v):
        if any(i < 0 for i in v):
            raise ValueError(f"Layer indices must be >= 0, got {sorted(v)}")
        return set(v)
