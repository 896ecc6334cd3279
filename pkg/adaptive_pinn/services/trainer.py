"""
Training service: Adam, learning-rate schedules, early stopping and the
full-batch training loop for plain networks and adaptive PINNs.
"""

import math
import time
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..models.dataset import Dataset, TargetStats
from ..models.physics import PdeProblem
from ..models.training import (
    AdamState,
    EpochRecord,
    Schedule,
    ScheduleKind,
    TrainConfig,
    TrainMode,
    TrainReport,
)
from ..utils.file_utils import write_csv, write_json
from ..utils.seeding import derive_seed
from ..utils.validation import NumericalError, ShapeMismatchError, ValidationError
from . import autodiff as ad
from .blending import BlendingNeuron, loss_terms
from .data_service import split_indices
from .mlp import Mlp, network_output

REPORT_COLUMNS = ["epoch", "total_loss", "data_loss", "physics_loss", "lambda_p", "val_mape", "lr"]


def schedule_lr(base_lr: float, epoch: int, schedule: Schedule) -> float:
    """
    Learning rate for a 0-based epoch.

    Args:
        base_lr: Base learning rate
        epoch: Epoch index (>= 0)
        schedule: Schedule

    Returns:
        ``base_lr`` (constant) or ``base_lr * factor ** (epoch // every)``
    """
    if epoch < 0:
        raise ValidationError(f"Epoch must be >= 0, got {epoch}")
    if schedule.kind is ScheduleKind.CONSTANT:
        return base_lr
    return base_lr * schedule.factor ** (epoch // schedule.every)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    lr_scale: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, AdamState]:
    """
    One bias-corrected Adam update.

    Args:
        params: Parameter vector
        grads: Gradient vector
        state: Moment estimates
        lr: Learning rate
        beta1: First-moment decay
        beta2: Second-moment decay
        eps: Denominator offset
        lr_scale: Optional per-parameter multiplier (0 freezes a parameter)

    Returns:
        (updated parameters, updated state)
    """
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeMismatchError(
            f"Adam shapes differ: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise NumericalError(f"Non-finite gradient at parameter index {int(bad[0])}")

    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    step = lr * m_hat / (np.sqrt(v_hat) + eps)
    if lr_scale is not None:
        step = step * lr_scale
    return params - step, AdamState(m=m, v=v, t=t)


class EarlyStopping:
    """Patience-based stopping on a validation metric (lower is better)."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ValidationError(f"Patience must be >= 1, got {patience}")
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, value: float) -> bool:
        """
        Record an epoch's metric.

        Returns:
            True if this epoch is the new best
        """
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.wait = 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.wait >= self.patience


def validation_metric(y_true: np.ndarray, y_pred: np.ndarray) -> Tuple[float, str]:
    """MAPE, or MSE when some target is zero."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if np.any(y_true == 0):
        return float(np.mean((y_pred - y_true) ** 2)), "mse"
    return float(np.mean(np.abs(y_pred - y_true) / np.abs(y_true))), "mape"


def _check_mode(neuron: Optional[BlendingNeuron], prob: Optional[PdeProblem], cfg: TrainConfig):
    if cfg.mode is TrainMode.PINN and (neuron is None or prob is None):
        raise ValidationError("PINN training needs a blending neuron and a physics problem")
    if cfg.mode is TrainMode.DATA_ONLY and (neuron is not None or prob is not None):
        raise ValidationError("Data-only training takes neither a blending neuron nor a physics problem")


def train(
    net: Mlp,
    neuron: Optional[BlendingNeuron],
    ds: Dataset,
    prob: Optional[PdeProblem],
    cfg: TrainConfig,
    lr_scale: Optional[np.ndarray] = None,
    train_alpha: bool = True,
) -> Tuple[Mlp, Optional[BlendingNeuron], TrainReport]:
    """
    Full-batch training with early stopping on a validation split.

    Args:
        net: Initial network (not modified)
        neuron: Blending neuron (PINN mode only; not modified)
        ds: Training data; features as the network sees them
        prob: Physics problem (PINN mode only)
        cfg: Training configuration
        lr_scale: Per-parameter learning-rate multipliers (0 freezes)
        train_alpha: Whether the blending scalar is updated

    Returns:
        (best-validation network, its blending neuron, report)
    """
    _check_mode(neuron, prob, cfg)
    arch = net.arch
    if ds.n_features != arch.input_dim:
        raise ShapeMismatchError(f"Dataset has {ds.n_features} features, network expects {arch.input_dim}")
    pinn = cfg.mode is TrainMode.PINN

    val_idx, train_idx = split_indices(ds.n_samples, cfg.val_fraction, derive_seed(cfg.seed, "val-split"))
    y_raw = ds.raw_targets()
    x_train, x_val = ds.features[train_idx], ds.features[val_idx]
    y_val_raw = y_raw[val_idx]

    if cfg.standardize_targets:
        std = float(y_raw[train_idx].std())
        target_stats = TargetStats(mean=float(y_raw[train_idx].mean()), std=std if std > 0 else 1.0)
    else:
        target_stats = TargetStats(mean=0.0, std=1.0)
    y_train = target_stats.apply(y_raw[train_idx])

    n_net = arch.n_params
    if lr_scale is None:
        lr_scale = np.ones(n_net)
    lr_scale = np.asarray(lr_scale, dtype=float)
    if lr_scale.shape != (n_net,):
        raise ShapeMismatchError(f"lr_scale has shape {lr_scale.shape}, expected ({n_net},)")
    full_scale = np.concatenate([lr_scale, [1.0 if (pinn and train_alpha) else 0.0]])

    params = np.concatenate([net.params, [neuron.alpha if pinn else 0.0]])
    state = AdamState.zeros(params.size)
    stopper = EarlyStopping(cfg.early_stop_patience)
    best_params = params.copy()
    report = TrainReport()
    started = time.perf_counter()

    for epoch in range(1, cfg.max_epochs + 1):
        lr = schedule_lr(cfg.learning_rate, epoch - 1, cfg.schedule)

        tape = ad.Tape()
        theta_node = tape.variable(params[:n_net], name="theta")
        alpha_node = tape.variable(params[n_net], name="alpha") if pinn else None
        terms = loss_terms(arch, theta_node, alpha_node, x_train, y_train, prob,
                           target_stats.std, target_stats.mean)
        total = terms["total"]
        total_value = float(ad.value_of(total))
        if not math.isfinite(total_value):
            raise NumericalError(f"Non-finite loss at epoch {epoch}")

        adjoints = tape.backward(total)
        if pinn and cfg.alternate:
            # Even epochs fit the data term, odd epochs the physics term; alpha follows the full loss.
            part = (terms["lambda_d"] * terms["data"]) if epoch % 2 == 0 else (terms["lambda_p"] * terms["physics"])
            theta_adjoints = tape.backward(part)
        else:
            theta_adjoints = adjoints
        grads = np.zeros(params.size)
        grads[:n_net] = theta_adjoints.get(theta_node.index, np.zeros(n_net))
        if pinn:
            grads[n_net] = float(adjoints.get(alpha_node.index, 0.0))

        params, state = adam_step(params, grads, state, lr, cfg.beta1, cfg.beta2, cfg.eps, full_scale)

        pred_val = target_stats.invert(network_output(arch, params[:n_net], x_val))
        val_value, metric = validation_metric(y_val_raw, pred_val)
        if not math.isfinite(val_value):
            raise NumericalError(f"Non-finite validation metric at epoch {epoch}")

        lambda_p = float(ad.value_of(terms["lambda_p"])) if pinn else None
        report.epochs.append(EpochRecord(
            epoch=epoch,
            total_loss=total_value,
            data_loss=float(ad.value_of(terms["data"])),
            physics_loss=float(ad.value_of(terms["physics"])),
            lambda_p=lambda_p,
            val_mape=val_value,
            lr=lr,
        ))
        report.val_metric = metric

        if stopper.update(epoch, val_value):
            best_params = params.copy()
        if epoch % 500 == 0:
            logger.debug(f"epoch {epoch}: loss={total_value:.6g} val_{metric}={val_value:.6g}")
        if stopper.should_stop:
            report.stopped_early = True
            break

    report.n_epochs = len(report.epochs)
    report.best_epoch = stopper.best_epoch
    report.best_val_mape = stopper.best
    report.wall_time = time.perf_counter() - started
    report.target_mean = target_stats.mean
    report.target_std = target_stats.std

    best_net = Mlp(arch, best_params[:n_net])
    best_neuron = BlendingNeuron(best_params[n_net]) if pinn else None
    if best_neuron is not None:
        report.alpha_final = best_neuron.alpha
    logger.info(
        f"Training stopped after {report.n_epochs} epochs (best epoch {report.best_epoch}, "
        f"val {report.val_metric} {report.best_val_mape:.6g}, {report.wall_time:.1f}s)"
    )
    return best_net, best_neuron, report


def predict_raw(net: Mlp, report: TrainReport, features: np.ndarray) -> np.ndarray:
    """Predictions of a trained network in raw target units."""
    return net.forward_batch(features) * report.target_std + report.target_mean


def report_frame(report: TrainReport) -> pd.DataFrame:
    """Per-epoch trace as a table."""
    rows = [r.model_dump() for r in report.epochs]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report(report: TrainReport, directory: Union[str, Path], stem: str = "train") -> Tuple[Path, Path]:
    """
    Write ``<stem>.csv`` (one row per epoch) and ``<stem>.json`` (summary).

    Wall time is left out so reruns produce identical files.
    """
    directory = Path(directory)
    csv_path = write_csv(directory / f"{stem}.csv", report_frame(report))
    summary = report.model_dump(exclude={"epochs", "wall_time"})
    json_path = write_json(directory / f"{stem}.json", summary)
    return csv_path, json_path
