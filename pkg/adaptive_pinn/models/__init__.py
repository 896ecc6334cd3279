"""
Data models for the adaptive PINN toolkit.
"""

from .dataset import Dataset, FeatureRange, NormStats, SynthDomain, SynthSpec, TargetStats
from .network import Activation, ArchSpec, ParamLayout
from .physics import (
    CollocationScheme,
    DerivativeMode,
    FluidProperties,
    PdeProblem,
    ProblemKind,
    ResidualEval,
    SourceKind,
    SourceTerm,
)
from .report import (
    BenchmarkRow,
    CvSummary,
    HistogramBin,
    KdeCurve,
    MetricSummary,
    RobustnessReport,
    RunConfig,
    UTestMethod,
    UTestResult,
)
from .search import GaResult, Genome, ParamDimension, ParamKind, ParamSpace, SearchResult, Trial
from .training import (
    AdamState,
    BlendWeights,
    EpochRecord,
    LossBreakdown,
    Schedule,
    ScheduleKind,
    TrainConfig,
    TrainMode,
    TrainReport,
    TransferPlan,
)

__all__ = [
    "Dataset",
    "FeatureRange",
    "NormStats",
    "SynthDomain",
    "SynthSpec",
    "TargetStats",
    "Activation",
    "ArchSpec",
    "ParamLayout",
    "CollocationScheme",
    "DerivativeMode",
    "FluidProperties",
    "PdeProblem",
    "ProblemKind",
    "ResidualEval",
    "SourceKind",
    "SourceTerm",
    "BenchmarkRow",
    "CvSummary",
    "HistogramBin",
    "KdeCurve",
    "MetricSummary",
    "RobustnessReport",
    "RunConfig",
    "UTestMethod",
    "UTestResult",
    "GaResult",
    "Genome",
    "ParamDimension",
    "ParamKind",
    "ParamSpace",
    "SearchResult",
    "Trial",
    "AdamState",
    "BlendWeights",
    "EpochRecord",
    "LossBreakdown",
    "Schedule",
    "ScheduleKind",
    "TrainConfig",
    "TrainMode",
    "TrainReport",
    "TransferPlan",
]
