"""
Feed-forward network service: initialization, forward passes (plain,
batched, with input derivatives) and JSON checkpoints.

All passes go through :func:`network_output`, which works on plain arrays,
taped parameter nodes and Taylor jets alike; that shared path is what keeps
the value channel of :meth:`Mlp.forward_with_input_derivs` bit-identical to
:meth:`Mlp.forward`.
"""

import hashlib
import json
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from ..models.network import Activation, ArchSpec, ParamLayout
from ..utils.file_utils import atomic_write_text
from ..utils.seeding import make_rng
from ..utils.validation import DataError, ShapeMismatchError, ValidationError
from . import autodiff as ad
from .autodiff import Jet, Node

CHECKPOINT_VERSION = 1


def _activate(activation: Activation, h):
    if activation is Activation.SIGMOID:
        return ad.sigmoid(h)
    return ad.tanh(h)


def _block(theta, offset: int, shape: Tuple[int, ...]):
    """Parameter block ``shape`` starting at ``offset`` of a flat vector or taped node."""
    index = np.arange(offset, offset + int(np.prod(shape))).reshape(shape)
    return theta[index]


def _sum_columns(x):
    """Collapse the single output column: [N, 1] -> [N]."""
    if isinstance(x, Jet):
        return Jet(_sum_columns(x.primal),
                   x.first if ad._is_zero(x.first) else _sum_columns(x.first),
                   x.second if ad._is_zero(x.second) else _sum_columns(x.second))
    return ad.sum(x, axis=1)


def network_output(arch: ArchSpec, theta, inputs):
    """
    Evaluate the network on a batch.

    Args:
        arch: Architecture
        theta: Flat parameters (array or taped node; a trailing blending slot is ignored)
        inputs: [N x D] array, or a Jet whose primal is [N x D]

    Returns:
        [N] outputs of the same kind as the inputs/parameters
    """
    layout = ParamLayout(arch)
    h = inputs
    n_layers = arch.n_layers
    for layer in range(n_layers):
        weights = _block(theta, layout.offsets[2 * layer], layout.shapes[2 * layer])
        bias = _block(theta, layout.offsets[2 * layer + 1], layout.shapes[2 * layer + 1])
        h = h @ weights + bias
        if layer < n_layers - 1:
            h = _activate(arch.activation, h)
    return _sum_columns(h)


def coordinate_jet(inputs: np.ndarray, dim: int) -> Jet:
    """Input jet seeded along feature ``dim`` for a batch of points."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    tangent = np.zeros_like(inputs)
    tangent[:, dim] = 1.0
    return Jet(inputs, tangent, 0.0)


class Mlp:
    """Multilayer perceptron with a flat parameter vector."""

    def __init__(self, arch: ArchSpec, params: np.ndarray):
        """
        Wrap parameters for an architecture.

        Args:
            arch: Architecture
            params: Flat parameter vector (copied)
        """
        params = np.array(params, dtype=float).reshape(-1)
        if params.size != arch.n_params:
            raise ShapeMismatchError(
                f"Architecture {arch.to_string()} needs {arch.n_params} parameters, found {params.size}"
            )
        if not np.all(np.isfinite(params)):
            raise ValidationError("Network parameters must be finite")
        self.arch = arch
        self.params = params

    @classmethod
    def init(cls, arch: ArchSpec, seed: int) -> "Mlp":
        """
        Xavier-uniform weights, zero biases.

        Args:
            arch: Architecture
            seed: Initialization seed

        Returns:
            Fresh network
        """
        rng = make_rng(seed)
        blocks = []
        for fan_in, fan_out in arch.layer_shapes():
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            blocks.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            blocks.append(np.zeros(fan_out))
        return cls(arch, ParamLayout(arch).flatten(blocks))

    @property
    def layout(self) -> ParamLayout:
        return ParamLayout(self.arch)

    def layer_slices(self) -> List[slice]:
        """Parameter index range of each layer, input to output."""
        layout = self.layout
        return [layout.layer_slice(k) for k in range(self.arch.n_layers)]

    def copy(self) -> "Mlp":
        return Mlp(self.arch, self.params)

    def with_params(self, params: np.ndarray) -> "Mlp":
        return Mlp(self.arch, params)

    def _check_inputs(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 2 or inputs.shape[1] != self.arch.input_dim:
            raise ShapeMismatchError(
                f"Expected inputs with {self.arch.input_dim} columns, got shape {inputs.shape}"
            )
        return inputs

    def forward_batch(self, inputs: np.ndarray) -> np.ndarray:
        """Predictions for every row of an [N x D] matrix."""
        return np.asarray(network_output(self.arch, self.params, self._check_inputs(inputs)))

    def forward(self, x: Iterable[float]) -> float:
        """Prediction for one feature vector."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.arch.input_dim:
            raise ShapeMismatchError(f"Expected {self.arch.input_dim} features, got {x.size}")
        return float(self.forward_batch(x[None, :])[0])

    def input_derivs_batch(self, inputs: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(u, du/dx_dim, d2u/dx_dim2) for every row of an [N x D] matrix."""
        inputs = self._check_inputs(inputs)
        if not 0 <= dim < self.arch.input_dim:
            raise ShapeMismatchError(f"Derivative dimension {dim} outside [0, {self.arch.input_dim})")
        out = network_output(self.arch, self.params, coordinate_jet(inputs, dim))
        n = inputs.shape[0]
        return tuple(np.broadcast_to(np.asarray(c, dtype=float), (n,)).copy()
                     for c in (out.primal, out.first, out.second))

    def forward_with_input_derivs(self, x: Iterable[float], dim: int) -> Tuple[float, float, float]:
        """
        Value and first two derivatives along one input dimension.

        Args:
            x: Feature vector
            dim: Input dimension to differentiate along

        Returns:
            (u, du/dx_dim, d2u/dx_dim2)
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.arch.input_dim:
            raise ShapeMismatchError(f"Expected {self.arch.input_dim} features, got {x.size}")
        u, du, d2u = self.input_derivs_batch(x[None, :], dim)
        return float(u[0]), float(du[0]), float(d2u[0])

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "arch": {
                "input_dim": self.arch.input_dim,
                "hidden": list(self.arch.hidden),
                "output_dim": self.arch.output_dim,
                "activation": self.arch.activation.value,
            },
            "params": [float(p) for p in self.params],
        }


def param_hash(net: Mlp, layers: Optional[Iterable[int]] = None) -> str:
    """
    SHA-256 of the raw parameter bytes, optionally restricted to some layers.

    Args:
        net: Network
        layers: Layer indices to include (all when None)

    Returns:
        Hex digest
    """
    slices = net.layer_slices()
    selected = range(len(slices)) if layers is None else sorted(set(layers))
    digest = hashlib.sha256()
    for k in selected:
        digest.update(np.ascontiguousarray(net.params[slices[k]]).tobytes())
    return digest.hexdigest()


def save(net: Mlp, path: Union[str, Path]) -> Path:
    """Write a versioned JSON checkpoint (shortest round-trip float repr)."""
    text = json.dumps(net.to_dict(), indent=2) + "\n"
    target = atomic_write_text(path, text)
    logger.info(f"Saved {net.arch.to_string()} checkpoint to {target}")
    return target


def load(path: Union[str, Path], expected_arch: Optional[ArchSpec] = None) -> Mlp:
    """
    Read a checkpoint written by :func:`save`.

    Args:
        path: Checkpoint path
        expected_arch: When given, the stored architecture must match it

    Returns:
        Network
    """
    file_path = Path(path)
    if not file_path.exists():
        raise DataError(f"Checkpoint not found: {file_path}")
    try:
        payload = json.loads(file_path.read_text(encoding="utf-8"))
        version = payload["version"]
        arch_data = payload["arch"]
        params = payload["params"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataError(f"{file_path}: malformed checkpoint ({e})")

    if version != CHECKPOINT_VERSION:
        raise DataError(f"{file_path}: unsupported checkpoint version {version}")
    try:
        arch = ArchSpec(**arch_data)
    except (ValueError, TypeError) as e:
        raise DataError(f"{file_path}: invalid architecture ({e})")
    if not isinstance(params, list):
        raise DataError(f"{file_path}: params must be a list")
    if len(params) != arch.n_params:
        raise DataError(
            f"{file_path}: parameter count mismatch for {arch.to_string()}: "
            f"expected {arch.n_params}, found {len(params)}"
        )
    if expected_arch is not None and (
        expected_arch.layer_shapes() != arch.layer_shapes() or expected_arch.activation != arch.activation
    ):
        raise ShapeMismatchError(
            f"Checkpoint architecture {arch.to_string()} does not match expected {expected_arch.to_string()}"
        )
    try:
        net = Mlp(arch, np.asarray(params, dtype=float))
    except (TypeError, ValueError, ValidationError) as e:
        raise DataError(f"{file_path}: invalid parameters ({e})")
    logger.debug(f"Loaded {arch.to_string()} checkpoint from {file_path}")
    return net
