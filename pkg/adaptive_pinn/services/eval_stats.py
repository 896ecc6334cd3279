"""
Evaluation service: MAPE, k-fold and Monte Carlo cross-validation, the
Mann-Whitney U test and Gaussian kernel density estimates.

Cross-validation works on any :class:`ModelSpec`: something that fits a
dataset in raw units and returns a predictor in raw units.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import iqr, norm, rankdata
from tqdm import tqdm

from ..models.dataset import Dataset
from ..models.report import CvSummary, HistogramBin, KdeCurve, MetricSummary, RobustnessReport, UTestMethod, UTestResult
from ..utils.seeding import derive_seed, make_rng, stream
from ..utils.validation import AdaptivePinnError, ArrayValidator, NumericalError, ValidationError
from .data_service import split_indices, subset

EXACT_LIMIT = 8
ROBUSTNESS_COLUMNS = ["model", "max_var_pred", "max_var_pred_raw", "max_var_mape", "avg_epochs", "trials", "failures"]


class FittedModel:
    """Predictor returned by a model spec."""

    epochs: int = 0

    def predict(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ModelSpec:
    """A named recipe that trains a predictor on a raw-unit dataset."""

    name: str = "model"

    def fit(self, train: Dataset, seed: int) -> FittedModel:
        raise NotImplementedError


def mape(y_true, y_pred) -> MetricSummary:
    """
    Mean absolute percentage error.

    Args:
        y_true: Ground truth (no zeros)
        y_pred: Predictions

    Returns:
        MetricSummary with per-point errors
    """
    y_true = ArrayValidator.finite(y_true, "MAPE ground truth").reshape(-1)
    y_pred = ArrayValidator.finite(y_pred, "MAPE predictions").reshape(-1)
    ArrayValidator.same_length(y_true, y_pred, "MAPE inputs")
    if y_true.size == 0:
        raise ValidationError("MAPE of an empty sample")
    zeros = np.flatnonzero(y_true == 0)
    if zeros.size:
        raise ValidationError(f"MAPE undefined: ground truth is zero at index {int(zeros[0])}")
    errors = np.abs(y_pred - y_true) / np.abs(y_true)
    return MetricSummary(mape=float(np.mean(errors)), errors=errors)


def within_margin(y_true, y_pred, margin: float = 0.08) -> float:
    """Fraction of predictions within ``margin`` relative error."""
    return mape(y_true, y_pred).within_margin(margin)


def kfold_indices(n: int, k: int, seed: int) -> List[np.ndarray]:
    """Random partition of ``range(n)`` into k folds whose sizes differ by at most one."""
    if k < 2:
        raise ValidationError(f"k-fold needs k >= 2, got {k}")
    if k > n:
        raise ValidationError(f"k-fold needs k <= N, got k={k}, N={n}")
    order = make_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(order, k)]


def kfold_cv(spec: ModelSpec, ds: Dataset, k: int = 10, seed: int = 0) -> CvSummary:
    """
    k-fold cross-validated MAPE.

    Args:
        spec: Model recipe
        ds: Dataset in raw units
        k: Number of folds
        seed: Fold and training seed root

    Returns:
        Mean and population stddev of the fold MAPEs
    """
    folds = kfold_indices(ds.n_samples, k, derive_seed(seed, "folds"))
    everything = np.arange(ds.n_samples)
    fold_mapes = []
    for i, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(everything, test_idx)
        test = subset(ds, test_idx)
        fitted = spec.fit(subset(ds, train_idx), derive_seed(seed, "fold", i))
        fold_mapes.append(mape(test.raw_targets(), fitted.predict(test.features)).mape)
    summary = CvSummary(k=k, mean=float(np.mean(fold_mapes)), std=float(np.std(fold_mapes)), fold_mapes=fold_mapes)
    logger.info(f"{spec.name}: {k}-fold MAPE {summary.mean:.6g} +- {summary.std:.3g}")
    return summary


def _mc_trial(spec: ModelSpec, ds: Dataset, rest: np.ndarray, holdout: Dataset, train_fraction: float, seed: int):
    rng = stream(seed, "resplit")
    n_train = min(rest.size, max(2, int(math.floor(train_fraction * rest.size + 0.5))))
    train_idx = np.sort(rng.permutation(rest)[:n_train])
    try:
        fitted = spec.fit(subset(ds, train_idx), seed)
        predictions = np.asarray(fitted.predict(holdout.features), dtype=float)
        if not np.all(np.isfinite(predictions)):
            raise NumericalError("non-finite holdout predictions")
        return predictions, mape(holdout.raw_targets(), predictions).mape, fitted.epochs
    except AdaptivePinnError as e:
        logger.warning(f"{spec.name}: Monte Carlo trial failed ({e})")
        return None


def monte_carlo_cv(
    spec: ModelSpec,
    ds: Dataset,
    trials: int = 100,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    jobs: int = 1,
    trial_seeds: Optional[Sequence[int]] = None,
    progress: bool = False,
) -> RobustnessReport:
    """
    Robustness of a model under repeated random retraining.

    A holdout set is drawn once; each trial trains on a random resplit of the
    remaining points and predicts the holdout. Prediction variance is taken
    per holdout point across trials (max reported), in raw units and divided
    by the variance of all targets.

    Args:
        spec: Model recipe
        ds: Dataset in raw units
        trials: Number of trials (>= 2)
        holdout_fraction: Share of points in the fixed holdout
        seed: Root seed
        jobs: Parallel workers
        trial_seeds: Explicit per-trial seeds
        progress: Show a progress bar

    Returns:
        RobustnessReport
    """
    if trial_seeds is not None:
        trial_seeds = [int(s) for s in trial_seeds]
        trials = len(trial_seeds)
    if trials < 2:
        raise ValidationError(f"Monte Carlo validation needs >= 2 trials, got {trials}")
    if trial_seeds is None:
        trial_seeds = [derive_seed(seed, "mc-trial", t) for t in range(trials)]

    hold_idx, rest = split_indices(ds.n_samples, holdout_fraction, derive_seed(seed, "mc-holdout"))
    holdout = subset(ds, hold_idx)
    train_fraction = 1.0 - holdout_fraction

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        results = list(tqdm(
            executor.map(lambda s: _mc_trial(spec, ds, rest, holdout, train_fraction, s), trial_seeds),
            total=trials, desc=spec.name, disable=not progress,
        ))

    done = [r for r in results if r is not None]
    failures = trials - len(done)
    if len(done) < 2:
        raise NumericalError(f"{spec.name}: only {len(done)} of {trials} Monte Carlo trials succeeded")

    predictions = np.vstack([r[0] for r in done])
    mapes = np.array([r[1] for r in done])
    epochs = np.array([r[2] for r in done], dtype=float)
    var_pred_raw = float(np.max(np.var(predictions, axis=0)))
    target_var = float(np.var(ds.raw_targets()))
    report = RobustnessReport(
        model=spec.name,
        max_var_pred=var_pred_raw / target_var if target_var > 0 else var_pred_raw,
        max_var_pred_raw=var_pred_raw,
        max_var_mape=float(np.var(mapes)),
        avg_epochs=float(np.mean(epochs)),
        trials=trials,
        failures=failures,
        mean_mape=float(np.mean(mapes)),
    )
    logger.info(f"{spec.name}: max var(pred) {report.max_var_pred:.4g}, var(MAPE) {report.max_var_mape:.4g}, "
                f"{failures} failed trials")
    return report


def robustness_frame(reports: Sequence[RobustnessReport]) -> pd.DataFrame:
    """Robustness table, one row per model."""
    return pd.DataFrame([r.model_dump(include=set(ROBUSTNESS_COLUMNS)) for r in reports], columns=ROBUSTNESS_COLUMNS)


def variance_ordering_warning(reports: Dict[str, RobustnessReport], physics: str = "PINN", plain: str = "NN") -> bool:
    """
    Check that the physics-informed model varies less than the plain network.

    Returns:
        True when the ordering holds (or cannot be checked); logs a warning otherwise
    """
    if physics not in reports or plain not in reports:
        return True
    holds = reports[physics].max_var_pred < reports[plain].max_var_pred
    if not holds:
        logger.warning(
            f"{physics} prediction variance {reports[physics].max_var_pred:.4g} is not below "
            f"{plain} prediction variance {reports[plain].max_var_pred:.4g}"
        )
    return holds


def mann_whitney_u(sample_a, sample_b, method: Optional[UTestMethod] = None) -> UTestResult:
    """
    Two-sided Mann-Whitney U test.

    Samples of at most eight points each are tested exactly by enumerating
    every assignment of the pooled mid-ranks to the two groups; larger ones
    use the tie-corrected normal approximation with continuity correction.

    Args:
        sample_a: First sample
        sample_b: Second sample
        method: Force the exact or approximate path

    Returns:
        U statistic of the first sample and its p-value
    """
    a = np.asarray(sample_a, dtype=float).reshape(-1)
    b = np.asarray(sample_b, dtype=float).reshape(-1)
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise ValidationError("Mann-Whitney U needs two non-empty samples")

    ranks = rankdata(np.concatenate([a, b]))
    offset = n1 * (n1 + 1) / 2.0
    u = float(np.sum(ranks[:n1]) - offset)

    if method is None:
        method = UTestMethod.EXACT if (n1 <= EXACT_LIMIT and n2 <= EXACT_LIMIT) else UTestMethod.NORMAL_APPROX
    method = UTestMethod(method)

    if method is UTestMethod.EXACT:
        combos = np.array(list(itertools.combinations(range(n1 + n2), n1)), dtype=int)
        u_all = ranks[combos].sum(axis=1) - offset
        tol = 1e-9
        p_low = float(np.mean(u_all <= u + tol))
        p_high = float(np.mean(u_all >= u - tol))
        p = min(1.0, 2.0 * min(p_low, p_high))
    else:
        n = n1 + n2
        _, counts = np.unique(ranks, return_counts=True)
        ties = float(np.sum(counts ** 3 - counts))
        sigma2 = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1))) if n > 1 else 0.0
        mu = n1 * n2 / 2.0
        if sigma2 <= 0:
            p = 1.0
        else:
            z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(sigma2)
            p = min(1.0, 2.0 * float(norm.sf(z)))
    p = max(p, np.finfo(float).tiny)
    return UTestResult(u=u, p_value=p, method=method, n1=n1, n2=n2)


def silverman_bandwidth(sample) -> float:
    """``0.9 * min(sigma, IQR / 1.34) * n^(-1/5)`` (sigma with ddof=1)."""
    x = np.asarray(sample, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValidationError(f"KDE needs at least two points, got {x.size}")
    sigma = float(np.std(x, ddof=1))
    if not sigma > 0:
        raise ValidationError("KDE of a degenerate sample (zero variance)")
    spread = float(iqr(x)) / 1.34
    scale = min(sigma, spread) if spread > 0 else sigma
    return 0.9 * scale * x.size ** (-0.2)


def kde(sample, grid=None, bandwidth: Optional[float] = None, n_grid: int = 512) -> KdeCurve:
    """
    Gaussian kernel density estimate.

    Args:
        sample: Data
        grid: Evaluation points (data range +- 5 bandwidths when None)
        bandwidth: Kernel width (Silverman when None)
        n_grid: Size of the default grid

    Returns:
        KdeCurve
    """
    x = np.asarray(sample, dtype=float).reshape(-1)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValidationError(f"Bandwidth must be positive, got {h}")
    if grid is None:
        grid = np.linspace(x.min() - 5.0 * h, x.max() + 5.0 * h, n_grid)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    density = norm.pdf((grid[:, None] - x[None, :]) / h).mean(axis=1) / h
    return KdeCurve(grid=grid, density=density, bandwidth=h)


def histogram(values, bins: int, low: float, high: float) -> List[HistogramBin]:
    """Equal-width histogram on [low, high]."""
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=(low, high))
    return [HistogramBin(low=float(edges[i]), high=float(edges[i + 1]), count=int(counts[i])) for i in range(bins)]
