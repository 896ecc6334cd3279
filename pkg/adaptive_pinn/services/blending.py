"""
Blending neuron and composite loss.

``lambda_d = sigmoid(alpha)`` weighs the data term and ``lambda_p = 1 - lambda_d``
the physics term. The smaller of the two weights is always the one computed
through the sigmoid and the larger one as its complement, so the pair sums to
one exactly and swapping the sign of alpha swaps the weights bitwise.
"""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from ..models.dataset import Dataset
from ..models.network import ArchSpec
from ..models.physics import PdeProblem
from ..models.report import HistogramBin
from ..models.training import BlendWeights, LossBreakdown
from ..utils.validation import ValidationError
from . import autodiff as ad
from .autodiff import Node
from .mlp import Mlp, network_output
from .physics import NetworkField, physics_loss as _physics_loss, physics_loss_of


def blend_weights(alpha: float) -> BlendWeights:
    """
    Data / physics weights for a blending scalar.

    Args:
        alpha: Blending scalar

    Returns:
        (sigmoid(alpha), 1 - sigmoid(alpha))
    """
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise ValidationError(f"Blending scalar must be finite, got {alpha}")
    if alpha >= 0.0:
        lambda_p = float(expit(-alpha))
        lambda_d = 1.0 - lambda_p
    else:
        lambda_d = float(expit(alpha))
        lambda_p = 1.0 - lambda_d
    return BlendWeights(lambda_d=lambda_d, lambda_p=lambda_p)


def taped_weights(alpha: Node):
    """Same weights as :func:`blend_weights`, recorded on the tape of ``alpha``."""
    if float(alpha.value) >= 0.0:
        lambda_p = ad.sigmoid(-alpha)
        return 1.0 - lambda_p, lambda_p
    lambda_d = ad.sigmoid(alpha)
    return lambda_d, 1.0 - lambda_d


class BlendingNeuron:
    """Trainable scalar alpha (starts at 0, i.e. equal weights)."""

    def __init__(self, alpha: float = 0.0):
        alpha = float(alpha)
        if not math.isfinite(alpha):
            raise ValidationError(f"Blending scalar must be finite, got {alpha}")
        self.alpha = alpha

    def weights(self) -> BlendWeights:
        return blend_weights(self.alpha)

    def copy(self) -> "BlendingNeuron":
        return BlendingNeuron(self.alpha)

    def __repr__(self) -> str:
        return f"BlendingNeuron(alpha={self.alpha!r})"


def data_loss_of(arch: ArchSpec, theta, features: np.ndarray, targets: np.ndarray):
    """Mean squared error of the network on (features, targets); taped when theta is."""
    diff = network_output(arch, theta, features) - targets
    return ad.mean(diff * diff)


def data_loss(net: Mlp, ds: Dataset) -> float:
    """
    (1/N) * sum (y_hat_i - y_i)^2 over a dataset (in the dataset's target units).

    Args:
        net: Network
        ds: Dataset

    Returns:
        Mean squared error
    """
    if ds.n_samples == 0:
        raise ValidationError("Cannot compute the data loss of an empty dataset")
    return float(data_loss_of(net.arch, net.params, ds.features, ds.targets))


def physics_loss(net: Mlp, prob: PdeProblem) -> float:
    """Mean squared residual over the collocation set plus the boundary penalty."""
    return _physics_loss(net, prob)


def composite_loss(
    net: Mlp,
    ds: Dataset,
    prob: Optional[PdeProblem],
    neuron: BlendingNeuron,
) -> LossBreakdown:
    """
    ``lambda_d * L_data + lambda_p * L_physics``.

    Args:
        net: Network
        ds: Dataset for the data term
        prob: Problem for the physics term (0 when None)
        neuron: Blending neuron

    Returns:
        Loss breakdown
    """
    weights = neuron.weights()
    data = data_loss(net, ds)
    phys = physics_loss(net, prob) if prob is not None else 0.0
    return LossBreakdown(
        data_loss=data,
        physics_loss=phys,
        weights=weights,
        total=weights.lambda_d * data + weights.lambda_p * phys,
    )


def loss_terms(
    arch: ArchSpec,
    theta: Node,
    alpha: Optional[Node],
    features: np.ndarray,
    targets: np.ndarray,
    prob: Optional[PdeProblem],
    target_scale: float = 1.0,
    target_shift: float = 0.0,
) -> Dict[str, object]:
    """
    Taped loss components for one optimizer step.

    The physics term sees the network output mapped back through
    ``target_scale`` and ``target_shift`` (identity for unscaled targets).

    Returns:
        Mapping with ``data``, ``physics``, ``lambda_d``, ``lambda_p`` and ``total``;
        without a blending scalar the total is the data term alone
    """
    data = data_loss_of(arch, theta, features, targets)
    if alpha is None or prob is None:
        return {"data": data, "physics": 0.0, "lambda_d": 1.0, "lambda_p": 0.0, "total": data}
    phys = physics_loss_of(prob, NetworkField(arch, theta, target_scale, target_shift))
    lambda_d, lambda_p = taped_weights(alpha)
    return {
        "data": data,
        "physics": phys,
        "lambda_d": lambda_d,
        "lambda_p": lambda_p,
        "total": lambda_d * data + lambda_p * phys,
    }


def lambda_p_histogram(trace: Sequence[float], bins: int = 20) -> List[HistogramBin]:
    """
    Histogram of a lambda_p trace over [0, 1].

    Args:
        trace: Per-epoch lambda_p values
        bins: Number of equal-width bins

    Returns:
        Bins whose counts sum to ``len(trace)``
    """
    if bins < 1:
        raise ValidationError(f"Need at least one bin, got {bins}")
    counts, edges = np.histogram(np.asarray(trace, dtype=float), bins=bins, range=(0.0, 1.0))
    return [HistogramBin(low=float(edges[i]), high=float(edges[i + 1]), count=int(counts[i])) for i in range(bins)]
