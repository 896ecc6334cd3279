"""
Benchmark service: the six compared regressors as model specs, and the
suite that scores them on repeated holdout splits of the target data.
"""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from ..models.dataset import Dataset, NormStats
from ..models.network import ArchSpec
from ..models.report import BenchmarkRow, EvalSection, RowStatus
from ..models.training import TrainConfig, TrainMode, TrainReport, TransferPlan
from ..utils.seeding import derive_seed
from ..utils.validation import AdaptivePinnError, ValidationError
from .blending import BlendingNeuron
from .data_service import normalize, split
from .eval_stats import FittedModel, ModelSpec, mape
from .hyperopt import SVR_SPACE, bayes_opt, random_search, svr_objective
from .kernel_baselines import GpSpec, SvrSpec
from .mlp import Mlp
from .physics import DEFAULT_COLLOCATION, nusselt_smoothness
from .trainer import predict_raw, train
from .transfer import fine_tune, pretrain_source

MODEL_NAMES = ["TL-NN", "NN", "PINN", "GP", "SVR-RS", "SVR-Bayesian"]
BENCHMARK_COLUMNS = ["model", "median_mape", "n_seeds", "status", "detail"]


class NetworkPredictor(FittedModel):
    """Trained network plus the feature statistics of its training split."""

    def __init__(self, net: Mlp, report: TrainReport, stats: NormStats):
        self.net = net
        self.report = report
        self.stats = stats
        self.epochs = report.n_epochs

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict_raw(self.net, self.report, self.stats.apply(features))


class NetworkSpec(ModelSpec):
    """
    Plain network, adaptive PINN, or transfer-initialized network.

    The PINN variant adds the Nusselt smoothness residual along the first
    input; the transfer variant copies ``plan`` layers from ``source``.
    """

    def __init__(
        self,
        name: str,
        arch: ArchSpec,
        cfg: TrainConfig,
        n_collocation: int = DEFAULT_COLLOCATION,
        source: Optional[Mlp] = None,
        plan: Optional[TransferPlan] = None,
    ):
        if source is not None and plan is None:
            plan = TransferPlan(layers_to_copy={0})
        self.name = name
        self.arch = arch
        self.cfg = cfg
        self.n_collocation = n_collocation
        self.source = source
        self.plan = plan

    def fit(self, train_ds: Dataset, seed: int) -> FittedModel:
        normalized, stats = normalize(train_ds)
        cfg = self.cfg.model_copy(update={"seed": derive_seed(seed, "train")})
        prob = None
        if cfg.mode is TrainMode.PINN:
            prob = nusselt_smoothness(normalized, self.n_collocation, derive_seed(seed, "collocation"))
        if self.source is not None:
            net, _, report = fine_tune(self.source, normalized, prob, cfg, self.plan, seed, self.arch)
        else:
            neuron = BlendingNeuron(0.0) if prob is not None else None
            net, _, report = train(Mlp.init(self.arch, derive_seed(seed, "init")), neuron, normalized, prob, cfg)
        return NetworkPredictor(net, report, stats)


class TunedSvrSpec(ModelSpec):
    """SVR whose hyperparameters are searched on the training split first."""

    def __init__(self, method: str, budget: int = 20, folds: int = 5, n_init: int = 5, name: Optional[str] = None):
        if method not in ("random", "bayes"):
            raise ValidationError(f"Unknown search method {method!r}")
        self.method = method
        self.budget = budget
        self.folds = folds
        self.n_init = min(n_init, budget - 1)
        self.name = name or ("SVR-RS" if method == "random" else "SVR-Bayesian")

    def fit(self, train_ds: Dataset, seed: int) -> FittedModel:
        objective = svr_objective(train_ds, self.folds, derive_seed(seed, "folds"))
        if self.method == "random":
            result = random_search(SVR_SPACE, objective, self.budget, derive_seed(seed, "search"))
        else:
            result = bayes_opt(SVR_SPACE, objective, self.budget, self.n_init, derive_seed(seed, "search"))
        point = result.best.point
        logger.debug(f"{self.name}: C={point['C']:.4g} gamma={point['gamma']:.4g} epsilon={point['epsilon']:.4g}")
        return SvrSpec(point["C"], point["gamma"], point["epsilon"], self.name).fit(train_ds, seed)


def model_spec(
    name: str,
    arch: ArchSpec,
    cfg: TrainConfig,
    eval_cfg: EvalSection,
    source: Optional[Mlp] = None,
    n_collocation: int = DEFAULT_COLLOCATION,
    search_folds: int = 5,
) -> ModelSpec:
    """
    Model spec by benchmark name.

    Args:
        name: One of ``TL-NN, NN, PINN, GP, SVR, SVR-RS, SVR-Bayesian``
        arch: Network architecture
        cfg: Network training configuration
        eval_cfg: Kernel hyperparameters and search budget
        source: Pretrained source network (``TL-NN`` only)
        n_collocation: PINN collocation points
        search_folds: Folds of the SVR search objective

    Returns:
        Model spec
    """
    data_cfg = cfg.model_copy(update={"mode": TrainMode.DATA_ONLY})
    if name == "TL-NN":
        if source is None:
            raise ValidationError("TL-NN needs a pretrained source network")
        return NetworkSpec(name, arch, data_cfg, n_collocation, source=source)
    if name == "NN":
        return NetworkSpec(name, arch, data_cfg, n_collocation)
    if name == "PINN":
        return NetworkSpec(name, arch, cfg.model_copy(update={"mode": TrainMode.PINN}), n_collocation)
    if name == "GP":
        return GpSpec(eval_cfg.gp_gamma, eval_cfg.gp_noise)
    if name == "SVR":
        return SvrSpec(eval_cfg.svr_c, eval_cfg.svr_gamma, eval_cfg.svr_epsilon)
    if name == "SVR-RS":
        return TunedSvrSpec("random", eval_cfg.search_budget, search_folds)
    if name == "SVR-Bayesian":
        return TunedSvrSpec("bayes", eval_cfg.search_budget, search_folds)
    raise ValidationError(f"Unknown model {name!r}; choose from {MODEL_NAMES + ['SVR']}")


def source_network(ds_source: Dataset, arch: ArchSpec, cfg: TrainConfig, seed: int) -> Mlp:
    """Pretrain the transfer source on the normalized source dataset."""
    normalized, _ = normalize(ds_source)
    net, _ = pretrain_source(normalized, arch, cfg, derive_seed(seed, "source"))
    return net


def benchmark_suite(
    ds_source: Dataset,
    ds_target: Dataset,
    arch: ArchSpec,
    cfg: TrainConfig,
    eval_cfg: EvalSection,
    seed: int = 0,
    holdout_fraction: float = 0.2,
    n_collocation: int = DEFAULT_COLLOCATION,
    models: Sequence[str] = tuple(MODEL_NAMES),
) -> List[BenchmarkRow]:
    """
    Holdout MAPE of every model, median over ``eval_cfg.seeds`` splits.

    A model that raises on any split is reported as failed and the suite
    moves on to the next one.

    Args:
        ds_source: Source-domain data in raw units (for TL-NN)
        ds_target: Target-domain data in raw units
        arch: Network architecture
        cfg: Network training configuration
        eval_cfg: Seeds, kernel hyperparameters and search budget
        seed: Root seed
        holdout_fraction: Share of target points held out per split
        n_collocation: PINN collocation points
        models: Model names, in row order

    Returns:
        One row per model
    """
    source = None
    if "TL-NN" in models:
        try:
            source = source_network(ds_source, arch, cfg, seed)
        except AdaptivePinnError as e:
            logger.error(f"Source pretraining failed: {e}")

    splits = [split(ds_target, holdout_fraction, derive_seed(seed, "benchmark-split", s))
              for s in range(eval_cfg.seeds)]

    rows: List[BenchmarkRow] = []
    for name in models:
        try:
            if name == "TL-NN" and source is None:
                raise ValidationError("source network unavailable")
            spec = model_spec(name, arch, cfg, eval_cfg, source, n_collocation)
            mapes = []
            for s, (holdout, train_ds) in enumerate(splits):
                fitted = spec.fit(train_ds, derive_seed(seed, "benchmark", name, s))
                mapes.append(mape(holdout.raw_targets(), fitted.predict(holdout.features)).mape)
            row = BenchmarkRow(model=name, median_mape=float(np.median(mapes)), mapes=mapes)
            logger.info(f"{name}: median holdout MAPE {row.median_mape:.6g} over {len(mapes)} splits")
        except AdaptivePinnError as e:
            logger.error(f"{name} failed: {e}")
            row = BenchmarkRow(model=name, status=RowStatus.FAILED, detail=str(e))
        rows.append(row)

    ordering_checks(rows)
    return rows


def ordering_checks(rows: Sequence[BenchmarkRow]) -> Dict[str, bool]:
    """
    Expected orderings of the comparison (transfer beats plain, Bayesian beats random).

    Violations are logged as warnings; pairs with a failed row are skipped.
    """
    by_name = {r.model: r for r in rows if r.status is RowStatus.OK}
    checks = {}
    for better, worse in (("TL-NN", "NN"), ("SVR-Bayesian", "SVR-RS")):
        if better in by_name and worse in by_name:
            holds = by_name[better].median_mape <= by_name[worse].median_mape
            checks[f"{better}<={worse}"] = holds
            if not holds:
                logger.warning(f"{better} median MAPE {by_name[better].median_mape:.4g} exceeds "
                               f"{worse} median MAPE {by_name[worse].median_mape:.4g}")
    return checks


def benchmark_frame(rows: Sequence[BenchmarkRow]) -> pd.DataFrame:
    """Benchmark table, one row per model."""
    records = [
        {
            "model": r.model,
            "median_mape": r.median_mape if r.status is RowStatus.OK else math.nan,
            "n_seeds": len(r.mapes),
            "status": r.status.value,
            "detail": r.detail,
        }
        for r in rows
    ]
    return pd.DataFrame(records, columns=BENCHMARK_COLUMNS)
