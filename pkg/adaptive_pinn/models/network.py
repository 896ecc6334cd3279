"""
Network architecture and parameter-layout models.
"""

import re
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..utils.validation import ShapeMismatchError, ValidationError

_ARCH_PATTERN = re.compile(r"^\s*(\d+)\s*-\s*\[\s*([\d\s,]*)\]\s*-\s*(\d+)\s*$")


class Activation(str, Enum):
    """Hidden-layer activation (smooth, so second input derivatives exist)."""

    TANH = "tanh"
    SIGMOID = "sigmoid"


class ArchSpec(BaseModel):
    """Feed-forward architecture ``D-[h1,...,hk]-O`` with identity output."""

    model_config = ConfigDict(frozen=True)

    input_dim: int = Field(..., ge=1)
    hidden: List[int] = Field(default_factory=list, description="Hidden widths (empty = linear model)")
    output_dim: int = Field(1, ge=1)
    activation: Activation = Activation.TANH

    @field_validator("hidden")
    @classmethod
    def positive_widths(cls, v):
        for width in v:
            if width < 1:
                raise ValueError(f"Hidden widths must be >= 1, got {v}")
        return list(v)

    @classmethod
    def parse(cls, text: str, activation: Activation = Activation.TANH) -> "ArchSpec":
        """
        Parse the ``D-[h1,h2,...]-1`` architecture syntax.

        Args:
            text: Architecture string, e.g. ``3-[20,20,12]-1``
            activation: Hidden activation

        Returns:
            ArchSpec
        """
        match = _ARCH_PATTERN.match(text)
        if not match:
            raise ValidationError(f"Invalid architecture {text!r}; expected D-[h1,h2,...]-1")
        inner = match.group(2).strip()
        hidden = [int(w) for w in inner.split(",") if w.strip()] if inner else []
        try:
            return cls(input_dim=int(match.group(1)), hidden=hidden,
                       output_dim=int(match.group(3)), activation=activation)
        except ValueError as e:
            raise ValidationError(f"Invalid architecture {text!r}: {e}")

    def to_string(self) -> str:
        return f"{self.input_dim}-[{','.join(str(w) for w in self.hidden)}]-{self.output_dim}"

    def layer_shapes(self) -> List[Tuple[int, int]]:
        """(fan_in, fan_out) of every affine layer, input to output."""
        widths = [self.input_dim, *self.hidden, self.output_dim]
        return list(zip(widths[:-1], widths[1:]))

    @property
    def n_layers(self) -> int:
        return len(self.hidden) + 1

    @property
    def n_params(self) -> int:
        return sum(fan_in * fan_out + fan_out for fan_in, fan_out in self.layer_shapes())


class ParamLayout:
    """
    Flat parameter vector layout: for each layer its weights (row-major,
    ``fan_in x fan_out``) followed by its biases.
    """

    def __init__(self, arch: ArchSpec):
        self.arch = arch
        self.shapes: List[Tuple[int, ...]] = []
        self.offsets: List[int] = []
        offset = 0
        for fan_in, fan_out in arch.layer_shapes():
            for shape in ((fan_in, fan_out), (fan_out,)):
                self.shapes.append(shape)
                self.offsets.append(offset)
                offset += int(np.prod(shape))
        self.size = offset

    def layer_slice(self, layer: int) -> slice:
        """Index range of layer ``layer``'s weights and biases."""
        if not 0 <= layer < self.arch.n_layers:
            raise ValidationError(f"Layer index {layer} outside [0, {self.arch.n_layers})")
        start = self.offsets[2 * layer]
        stop = self.offsets[2 * layer + 1] + self.shapes[2 * layer + 1][0]
        return slice(start, stop)

    def unflatten(self, theta: np.ndarray) -> List[np.ndarray]:
        """Split a flat vector into ``[W0, b0, W1, b1, ...]`` (copies)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ShapeMismatchError(f"Expected {self.size} parameters, found {theta.size}")
        return [theta[o:o + int(np.prod(s))].reshape(s).copy() for o, s in zip(self.offsets, self.shapes)]

    def flatten(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Inverse of :meth:`unflatten`."""
        if len(blocks) != len(self.shapes):
            raise ShapeMismatchError(f"Expected {len(self.shapes)} blocks, found {len(blocks)}")
        parts = []
        for block, shape in zip(blocks, self.shapes):
            block = np.asarray(block, dtype=float)
            if block.shape != shape:
                raise ShapeMismatchError(f"Block shape {block.shape} does not match layout {shape}")
            parts.append(block.reshape(-1))
        return np.concatenate(parts) if parts else np.zeros(0)
