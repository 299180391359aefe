"""
Layer objects wrapping the kernels in ops.py.

Each layer is described by a LayerSpec, owns its parameter arrays, caches
what its backward pass needs during forward, and accumulates gradients in
``grads`` under the same names as ``params``.
"""

from dataclasses import asdict, dataclass, fields
from typing import Dict, Optional, Tuple

import numpy as np

from deepprior.errors import DomainError, ShapeError
from deepprior.neuralnet import ops

LAYER_KINDS = ("conv", "maxpool", "fullyconnected", "relu", "dropout", "residual", "priorlayer")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int = 0
    size: int = 0
    stride: int = 1
    padding: int = 0
    pool: int = 0
    neurons: int = 0
    rate: float = 0.0
    block: str = "bottleneck"
    frozen: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise DomainError(f"Unknown layer kind '{self.kind}'")
        if self.stride < 1 or self.padding < 0:
            raise DomainError(f"Invalid stride/padding in {self}")
        if self.kind in ("conv", "residual") and (self.filters <= 0 or (self.kind == "conv" and self.size <= 0)):
            raise DomainError(f"{self.kind} layer needs positive filters and size: {self}")
        if self.kind == "maxpool" and self.pool <= 0:
            raise DomainError(f"maxpool layer needs a positive pool size: {self}")
        if self.kind in ("fullyconnected", "priorlayer") and self.neurons <= 0:
            raise DomainError(f"{self.kind} layer needs a positive neuron count: {self}")
        if self.kind == "dropout" and not 0.0 <= self.rate < 1.0:
            raise DomainError(f"Dropout rate must lie in [0, 1): {self}")
        if self.kind == "residual" and self.block not in ("bottleneck", "basic"):
            raise DomainError(f"Unknown residual block type '{self.block}'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LayerSpec":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def he_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Layer:
    """Base layer: identity with no parameters."""

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.input_shape: Optional[Tuple[int, ...]] = None
        self.output_shape: Optional[Tuple[int, ...]] = None

    @property
    def trainable(self) -> bool:
        return bool(self.params) and not self.spec.frozen

    def build(self, input_shape: Tuple[int, ...], rng: np.random.Generator, dtype) -> Tuple[int, ...]:
        self.input_shape = tuple(input_shape)
        self.output_shape = self._build(self.input_shape, rng, np.dtype(dtype))
        return self.output_shape

    def _build(self, input_shape, rng, dtype):
        return input_shape

    def forward(self, x, train: bool = False, rng: Optional[np.random.Generator] = None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def zero_grad(self):
        for name, value in self.params.items():
            self.grads[name] = np.zeros_like(value)

    def signature(self) -> Optional[np.ndarray]:
        """Activation pattern of the last forward pass (kinks of piecewise-linear layers)."""
        return None


class Conv2D(Layer):
    def _build(self, input_shape, rng, dtype):
        channels, height, width = input_shape
        f = self.spec.size
        self.params = {
            "weight": he_normal(rng, (self.spec.filters, channels, f, f), channels * f * f, dtype),
            "bias": np.zeros(self.spec.filters, dtype=dtype),
        }
        self.zero_grad()
        out_h = ops.conv_output_size(height, f, self.spec.stride, self.spec.padding)
        out_w = ops.conv_output_size(width, f, self.spec.stride, self.spec.padding)
        if out_h < 1 or out_w < 1:
            raise ShapeError(f"Convolution {self.spec} collapses input {input_shape}")
        return (self.spec.filters, out_h, out_w)

    def forward(self, x, train=False, rng=None):
        out, self._cache = ops.conv2d_forward(
            x, self.params["weight"], self.params["bias"], self.spec.stride, self.spec.padding)
        return out

    def backward(self, dout):
        dx, dw, db = ops.conv2d_backward(dout, self._cache)
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class MaxPool2D(Layer):
    def _build(self, input_shape, rng, dtype):
        channels, height, width = input_shape
        pool = self.spec.pool
        return (channels, -(-height // pool), -(-width // pool))

    def forward(self, x, train=False, rng=None):
        out, self._cache = ops.maxpool2d_forward(x, self.spec.pool)
        return out

    def backward(self, dout):
        return ops.maxpool2d_backward(dout, self._cache)

    def signature(self):
        return self._cache[2].reshape(-1)


class FullyConnected(Layer):
    def _build(self, input_shape, rng, dtype):
        fan_in = int(np.prod(input_shape))
        self.params = {
            "weight": he_normal(rng, (self.spec.neurons, fan_in), fan_in, dtype),
            "bias": np.zeros(self.spec.neurons, dtype=dtype),
        }
        self.zero_grad()
        return (self.spec.neurons,)

    def forward(self, x, train=False, rng=None):
        out, self._cache = ops.fully_connected_forward(x, self.params["weight"], self.params["bias"])
        return out

    def backward(self, dout):
        dx, dw, db = ops.fully_connected_backward(dout, self._cache)
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class PriorLayer(FullyConnected):
    """
    Final linear layer mapping k prior coefficients to 3J coordinates.

    Starts at zero until a PCA prior is installed with set_prior.
    """

    def _build(self, input_shape, rng, dtype):
        fan_in = int(np.prod(input_shape))
        self.params = {
            "weight": np.zeros((self.spec.neurons, fan_in), dtype=dtype),
            "bias": np.zeros(self.spec.neurons, dtype=dtype),
        }
        self.zero_grad()
        return (self.spec.neurons,)

    def set_prior(self, weights: np.ndarray, bias: np.ndarray):
        if weights.shape != self.params["weight"].shape or bias.shape != self.params["bias"].shape:
            raise ShapeError(
                f"Prior of shape {weights.shape}/{bias.shape} does not fit layer "
                f"{self.params['weight'].shape}/{self.params['bias'].shape}"
            )
        self.params["weight"][...] = weights
        self.params["bias"][...] = bias


class ReLU(Layer):
    def forward(self, x, train=False, rng=None):
        out, self._mask = ops.relu_forward(x)
        return out

    def backward(self, dout):
        return ops.relu_backward(dout, self._mask)

    def signature(self):
        return self._mask.reshape(-1)


class Dropout(Layer):
    def forward(self, x, train=False, rng=None):
        out, self._mask = ops.dropout(x, self.spec.rate, train, rng)
        return out

    def backward(self, dout):
        return ops.dropout_backward(dout, self._mask)


class Residual(Layer):
    """
    Residual module: a convolution branch added to a shortcut.

    bottleneck: 1x1 -> relu -> 3x3 (strided) -> relu -> 1x1
    basic:      3x3 (strided) -> relu -> 3x3
    The shortcut is a strided 1x1 projection whenever the stride is above 1
    or the channel count changes, and the identity otherwise.
    """

    def _build(self, input_shape, rng, dtype):
        channels = input_shape[0]
        filters, stride = self.spec.filters, self.spec.stride
        if self.spec.block == "bottleneck":
            mid = max(1, filters // 2)
            branch = [
                LayerSpec("conv", filters=mid, size=1),
                LayerSpec("relu"),
                LayerSpec("conv", filters=mid, size=3, stride=stride, padding=1),
                LayerSpec("relu"),
                LayerSpec("conv", filters=filters, size=1),
            ]
        else:
            branch = [
                LayerSpec("conv", filters=filters, size=3, stride=stride, padding=1),
                LayerSpec("relu"),
                LayerSpec("conv", filters=filters, size=3, padding=1),
            ]
        self.branch = [build_layer(spec) for spec in branch]
        shape = tuple(input_shape)
        for layer in self.branch:
            shape = layer.build(shape, rng, dtype)

        self.shortcut = None
        if stride > 1 or channels != filters:
            self.shortcut = Conv2D(LayerSpec("conv", filters=filters, size=1, stride=stride))
            short_shape = self.shortcut.build(input_shape, rng, dtype)
            if short_shape != shape:
                raise ShapeError(f"Residual shortcut {short_shape} does not match branch {shape}")

        self.params = {}
        for name, layer in self._sublayers():
            for pname, value in layer.params.items():
                self.params[f"{name}.{pname}"] = value
        self.zero_grad()
        return shape

    def _sublayers(self):
        named = [(f"branch{i}", layer) for i, layer in enumerate(self.branch)]
        if self.shortcut is not None:
            named.append(("shortcut", self.shortcut))
        return named

    def forward(self, x, train=False, rng=None):
        out = x
        for layer in self.branch:
            out = layer.forward(out, train, rng)
        skip = self.shortcut.forward(x, train, rng) if self.shortcut is not None else x
        return out + skip

    def backward(self, dout):
        for _, layer in self._sublayers():
            layer.zero_grad()
        grad = dout
        for layer in reversed(self.branch):
            grad = layer.backward(grad)
        dx = grad + (self.shortcut.backward(dout) if self.shortcut is not None else dout)
        for name, layer in self._sublayers():
            for pname, value in layer.grads.items():
                self.grads[f"{name}.{pname}"] += value
        return dx

    def signature(self):
        parts = [layer.signature() for layer in self.branch]
        parts = [p for p in parts if p is not None]
        return np.concatenate(parts) if parts else None


_LAYER_TYPES = {
    "conv": Conv2D,
    "maxpool": MaxPool2D,
    "fullyconnected": FullyConnected,
    "priorlayer": PriorLayer,
    "relu": ReLU,
    "dropout": Dropout,
    "residual": Residual,
}


def build_layer(spec: LayerSpec) -> Layer:
    return _LAYER_TYPES[spec.kind](spec)


def residual_block_forward(block: Residual, x, train: bool = False, rng=None):
    return block.forward(x, train, rng)


def residual_block_backward(block: Residual, dout):
    """Input gradient; parameter gradients accumulate in block.grads."""
    return block.backward(dout)
