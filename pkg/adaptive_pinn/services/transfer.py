"""
Transfer-learning service: initialize a target network from source layers,
train with frozen (or slowed) layers, and sweep the transferred layer.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..models.dataset import Dataset
from ..models.network import ArchSpec
from ..models.physics import PdeProblem
from ..models.training import TrainConfig, TrainMode, TrainReport, TransferPlan
from ..utils.seeding import derive_seed
from ..utils.validation import ArrayValidator, NumericalError, ShapeMismatchError, ValidationError
from .blending import BlendingNeuron
from .data_service import split
from .eval_stats import mape
from .mlp import Mlp, param_hash
from .trainer import predict_raw, train

SOFT_FREEZE_SCALE = 0.1


def transfer_init(source: Mlp, target_arch: ArchSpec, plan: TransferPlan, seed: int) -> Mlp:
    """
    Fresh target network with some layers copied from a source network.

    Args:
        source: Trained source network
        target_arch: Target architecture
        plan: Layers to copy
        seed: Initialization seed for the remaining layers

    Returns:
        Target network
    """
    target = Mlp.init(target_arch, seed)
    if not plan.layers_to_copy:
        return target

    source_shapes = source.arch.layer_shapes()
    target_shapes = target_arch.layer_shapes()
    params = target.params.copy()
    source_slices, target_slices = source.layer_slices(), target.layer_slices()
    for k in sorted(plan.layers_to_copy):
        if k >= len(source_shapes) or k >= len(target_shapes):
            raise ShapeMismatchError(
                f"Layer {k} does not exist in both networks "
                f"(source has {len(source_shapes)}, target has {len(target_shapes)})"
            )
        if source_shapes[k] != target_shapes[k]:
            raise ShapeMismatchError(
                f"Layer {k} shape mismatch: source {source_shapes[k]} vs target {target_shapes[k]}"
            )
        params[target_slices[k]] = source.params[source_slices[k]]

    if source.arch.activation != target_arch.activation:
        logger.warning(f"Transferring layers between {source.arch.activation.value} and "
                       f"{target_arch.activation.value} networks")
    logger.debug(f"Copied layers {sorted(plan.layers_to_copy)} into {target_arch.to_string()}")
    return Mlp(target_arch, params)


def freeze_mask(net: Mlp, layers: Iterable[int], scale: float = 0.0) -> np.ndarray:
    """Per-parameter learning-rate multipliers: ``scale`` on ``layers``, 1 elsewhere."""
    mask = np.ones(net.arch.n_params)
    slices = net.layer_slices()
    for k in ArrayValidator.indices(layers, len(slices), "Frozen layers"):
        mask[slices[k]] = scale
    return mask


def train_frozen(
    net: Mlp,
    neuron: Optional[BlendingNeuron],
    ds: Dataset,
    prob: Optional[PdeProblem],
    cfg: TrainConfig,
    frozen_layers: Iterable[int] = (),
    fine_tune_alpha: bool = True,
    soft: bool = False,
) -> Tuple[Mlp, Optional[BlendingNeuron], TrainReport]:
    """
    Train with some layers held fixed (or at 0.1x learning rate when ``soft``).

    Args:
        net: Initial network
        neuron: Blending neuron (PINN mode)
        ds: Training data
        prob: Physics problem (PINN mode)
        cfg: Training configuration
        frozen_layers: Layer indices to hold
        fine_tune_alpha: Whether the blending scalar trains
        soft: Slow the layers down instead of freezing them

    Returns:
        (network, neuron, report) as from training
    """
    frozen = sorted(set(frozen_layers))
    scale = SOFT_FREEZE_SCALE if soft else 0.0
    mask = freeze_mask(net, frozen, scale)
    before = param_hash(net, frozen) if frozen and not soft else None

    trained, trained_neuron, report = train(net, neuron, ds, prob, cfg, lr_scale=mask, train_alpha=fine_tune_alpha)

    if before is not None and param_hash(trained, frozen) != before:
        raise NumericalError(f"Frozen layers {frozen} changed during training")
    return trained, trained_neuron, report


def pretrain_source(ds_source: Dataset, arch: ArchSpec, cfg: TrainConfig, seed: int) -> Tuple[Mlp, TrainReport]:
    """Data-only training of the source network."""
    source_cfg = cfg.model_copy(update={"mode": TrainMode.DATA_ONLY})
    net = Mlp.init(arch, derive_seed(seed, "source-init"))
    trained, _, report = train(net, None, ds_source, None, source_cfg)
    logger.info(f"Source network trained: best val {report.val_metric} {report.best_val_mape:.6g}")
    return trained, report


def fine_tune(
    source: Mlp,
    ds_target: Dataset,
    prob: Optional[PdeProblem],
    cfg: TrainConfig,
    plan: TransferPlan,
    seed: int,
    target_arch: Optional[ArchSpec] = None,
) -> Tuple[Mlp, Optional[BlendingNeuron], TrainReport]:
    """
    Transfer-initialize and train a target network.

    The blending scalar starts again at 0 rather than being carried over.

    Args:
        source: Trained source network
        ds_target: Target training data
        prob: Physics problem (PINN mode)
        cfg: Training configuration
        plan: Transfer plan
        seed: Initialization seed
        target_arch: Target architecture (source architecture by default)

    Returns:
        (network, neuron, report)
    """
    arch = target_arch or source.arch
    net = transfer_init(source, arch, plan, derive_seed(seed, "target-init"))
    neuron = BlendingNeuron(0.0) if cfg.mode is TrainMode.PINN else None
    frozen = plan.layers_to_copy if (plan.freeze_copied or plan.soft_freeze) else set()
    trained, trained_neuron, report = train_frozen(
        net, neuron, ds_target, prob, cfg, frozen, plan.fine_tune_alpha, soft=plan.soft_freeze
    )
    report.alpha_reinitialized = neuron is not None
    return trained, trained_neuron, report


def _sweep_cell(source: Mlp, train_ds: Dataset, holdout: Dataset, prob: Optional[PdeProblem],
                cfg: TrainConfig, layer: int, seed: int) -> float:
    plan = TransferPlan(layers_to_copy={layer}, freeze_copied=True)
    run_cfg = cfg.model_copy(update={"seed": derive_seed(seed, "train")})
    net, _, report = fine_tune(source, train_ds, prob, run_cfg, plan, seed)
    return mape(holdout.raw_targets(), predict_raw(net, report, holdout.features)).mape


def layer_sweep(
    source: Mlp,
    target_ds: Dataset,
    prob: Optional[PdeProblem],
    cfg: TrainConfig,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    holdout_fraction: float = 0.2,
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Holdout MAPE when transferring (and freezing) one hidden layer at a time.

    Args:
        source: Trained source network
        target_ds: Normalized target dataset
        prob: Physics problem (PINN mode)
        cfg: Training configuration
        seeds: Seeds per row; each row reports the median
        holdout_fraction: Share of the target data held out
        jobs: Parallel workers

    Returns:
        Table with columns ``layer_index, median_mape, seeds``
    """
    n_hidden = len(source.arch.hidden)
    if n_hidden == 0:
        raise ShapeMismatchError("Layer sweep needs a source network with hidden layers")
    if not seeds:
        raise ValidationError("Layer sweep needs at least one seed")

    holdout, train_ds = split(target_ds, holdout_fraction, derive_seed(cfg.seed, "sweep-holdout"))
    cells = [(k, s) for k in range(n_hidden) for s in seeds]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        results = list(executor.map(
            lambda cell: _sweep_cell(source, train_ds, holdout, prob, cfg, cell[0], cell[1]), cells
        ))

    rows: List[dict] = []
    for k in range(n_hidden):
        values = [r for (layer, _), r in zip(cells, results) if layer == k]
        rows.append({"layer_index": k, "median_mape": float(np.median(values)), "seeds": len(values)})
        logger.info(f"Layer {k}: median holdout MAPE {rows[-1]['median_mape']:.6g} over {len(values)} seeds")
    return pd.DataFrame(rows, columns=["layer_index", "median_mape", "seeds"])
