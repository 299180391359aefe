from collections import OrderedDict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from deepprior.errors import ShapeError
from deepprior.neuralnet.layers import Layer, LayerSpec, PriorLayer, build_layer


class Network:
    """
    Ordered stack of layers with a fixed input shape (C, H, W).

    ``mode`` is "eval" unless a training-mode forward pass is running; only
    dropout behaves differently between the two.
    """

    def __init__(
        self,
        specs: Sequence[LayerSpec],
        input_shape: Tuple[int, int, int],
        kind: str = "custom",
        dtype="float64",
        seed: int = 0,
    ):
        self.kind = kind
        self.specs: List[LayerSpec] = list(specs)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.dtype = np.dtype(dtype)
        self.mode = "eval"

        for spec in self.specs[:-1]:
            if spec.kind == "priorlayer":
                raise ShapeError("A prior layer may only be the last layer of a network")

        rng = np.random.default_rng(seed)
        self.layers: List[Layer] = []
        shape = self.input_shape
        for spec in self.specs:
            layer = build_layer(spec)
            shape = layer.build(shape, rng, self.dtype)
            self.layers.append(layer)
        self.output_shape = shape

    @property
    def output_dim(self) -> int:
        return int(np.prod(self.output_shape))

    @property
    def prior_layer(self) -> Optional[PriorLayer]:
        last = self.layers[-1] if self.layers else None
        return last if isinstance(last, PriorLayer) else None

    def _named(self, trainable_only: bool):
        for i, layer in enumerate(self.layers):
            if trainable_only and not layer.trainable:
                continue
            for name in layer.params:
                yield f"{i}.{layer.spec.kind}.{name}", layer, name

    def parameters(self, trainable_only: bool = False) -> Dict[str, np.ndarray]:
        return OrderedDict((key, layer.params[name]) for key, layer, name in self._named(trainable_only))

    def gradients(self, trainable_only: bool = False) -> Dict[str, np.ndarray]:
        return OrderedDict((key, layer.grads[name]) for key, layer, name in self._named(trainable_only))

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def zero_parameters(self):
        for value in self.parameters().values():
            value[...] = 0

    def forward(self, x: np.ndarray, train: bool = False, rng: Optional[np.random.Generator] = None):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 3:
            x = x[None]
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"Network expects input {self.input_shape}, got {tuple(x.shape[1:])}")
        self.mode = "train" if train else "eval"
        try:
            for layer in self.layers:
                x = layer.forward(x, train, rng)
        finally:
            self.mode = "eval"
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        """Backpropagate dL/doutput; parameter gradients are written to fresh buffers."""
        self.zero_grad()
        grad = np.asarray(dout, dtype=self.dtype)
        grad = grad.reshape((grad.shape[0],) + tuple(self.output_shape))
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def signature(self) -> np.ndarray:
        parts = [layer.signature() for layer in self.layers]
        parts = [np.asarray(p).reshape(-1) for p in parts if p is not None]
        return np.concatenate(parts) if parts else np.zeros(0)

    def install_prior(self, weights: np.ndarray, bias: np.ndarray):
        layer = self.prior_layer
        if layer is None:
            raise ShapeError(f"Network '{self.kind}' has no prior layer")
        layer.set_prior(np.asarray(weights, dtype=self.dtype), np.asarray(bias, dtype=self.dtype))

    def load_parameters(self, values: Dict[str, np.ndarray]):
        params = self.parameters()
        if set(values) != set(params):
            missing = sorted(set(params) - set(values))
            extra = sorted(set(values) - set(params))
            raise ShapeError(f"Parameter sets differ (missing={missing[:3]}, unexpected={extra[:3]})")
        for key, value in values.items():
            if params[key].shape != value.shape:
                raise ShapeError(f"Parameter {key} has shape {value.shape}, expected {params[key].shape}")
            params[key][...] = value

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "input_shape": list(self.input_shape),
            "dtype": self.dtype.name,
            "layers": [spec.to_dict() for spec in self.specs],
        }

    @classmethod
    def from_description(cls, description: dict) -> "Network":
        return cls(
            [LayerSpec.from_dict(d) for d in description["layers"]],
            tuple(description["input_shape"]),
            kind=description["kind"],
            dtype=description["dtype"],
        )
