"""
Physics models: fluid/solid properties, source terms and 1-D PDE problems.
"""

from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ProblemKind(str, Enum):
    """Reduced one-dimensional heat-transfer problems."""

    CONDUCTION = "conduction1d"
    CONDUCTION_VARK = "conduction-vark1d"
    CONVDIFF = "convdiff1d"


class CollocationScheme(str, Enum):
    UNIFORM_RANDOM = "uniform-random"
    EQUI_SPACED = "equi-spaced"


class DerivativeMode(str, Enum):
    """How input derivatives of the field are obtained."""

    TAYLOR = "taylor"
    FINITE_DIFFERENCE = "finite-difference"


class FluidProperties(BaseModel):
    """Material constants; pressure and viscosity are recorded only."""

    model_config = ConfigDict(frozen=True)

    rho: float = Field(1.0, gt=0.0, description="Density")
    mu: float = Field(1.0e-3, ge=0.0, description="Dynamic viscosity")
    cp: float = Field(1.0, gt=0.0, description="Specific heat capacity")
    k_f: float = Field(1.0, gt=0.0, description="Fluid thermal conductivity")
    k_s: float = Field(1.0, gt=0.0, description="Solid thermal conductivity")
    g: float = Field(9.81, ge=0.0, description="Gravity magnitude")
    u_adv: float = Field(1.0, description="Advection velocity")
    pressure: float = Field(0.0, description="Reference pressure")


class SourceKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    SINE = "sine"
    MANUFACTURED = "manufactured"


class SourceTerm(BaseModel):
    """
    Volumetric source f(x).

    ``sine`` is ``amplitude * sin(frequency * pi * x)``; ``manufactured`` is the
    source for which ``T(x) = sin(pi x)`` solves the problem exactly.
    """

    model_config = ConfigDict(frozen=True)

    kind: SourceKind = SourceKind.ZERO
    amplitude: float = 0.0
    frequency: float = 1.0


class PdeProblem(BaseModel):
    """A 1-D residual problem with Dirichlet boundary values and collocation points."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: ProblemKind
    domain: Tuple[float, float] = (0.0, 1.0)
    boundary: Tuple[float, float] = (0.0, 0.0)
    source: SourceTerm = Field(default_factory=SourceTerm)
    props: FluidProperties = Field(default_factory=FluidProperties)
    collocation: np.ndarray = Field(..., description="Collocation points x_j")
    boundary_weight: float = Field(1.0, ge=0.0)
    c_k: float = Field(0.1, description="Linear temperature coefficient of conductivity")
    coordinate: int = Field(0, ge=0, description="Network input carrying x")
    anchor: Optional[np.ndarray] = Field(None, description="Values of the other network inputs")
    derivative_mode: DerivativeMode = DerivativeMode.TAYLOR
    fd_step: float = Field(1.0e-4, gt=0.0)
    name: Optional[str] = None

    @field_validator("collocation", mode="before")
    @classmethod
    def as_points(cls, v):
        return np.asarray(v, dtype=float).reshape(-1)

    @field_validator("anchor", mode="before")
    @classmethod
    def as_anchor(cls, v):
        return None if v is None else np.asarray(v, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def check_problem(self):
        a, b = self.domain
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"Domain must satisfy a < b, got {self.domain}")
        if not np.all(np.isfinite(self.boundary)):
            raise ValueError("Boundary values must be finite")
        if self.collocation.size < 1:
            raise ValueError("At least one collocation point is required")
        if np.any(self.collocation < a) or np.any(self.collocation > b):
            raise ValueError(f"Collocation points must lie in [{a}, {b}]")
        if self.anchor is not None and not 0 <= self.coordinate < self.anchor.size:
            raise ValueError(f"Coordinate {self.coordinate} outside anchor of length {self.anchor.size}")
        return self

    @property
    def input_dim(self) -> int:
        return 1 if self.anchor is None else int(self.anchor.size)

    @property
    def peclet(self) -> float:
        a, b = self.domain
        return self.props.rho * self.props.cp * self.props.u_adv * (b - a) / self.props.k_f


class ResidualEval(BaseModel):
    """Per-point residuals and the boundary penalty of one evaluation."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    residuals: np.ndarray
    boundary_penalty: float = Field(..., ge=0.0)

    @model_validator(mode="after")
    def check_finite(self):
        if not np.all(np.isfinite(self.residuals)) or not np.isfinite(self.boundary_penalty):
            raise ValueError("Residuals must be finite")
        return self

    @property
    def loss(self) -> float:
        return float(np.mean(self.residuals ** 2)) + self.boundary_penalty
