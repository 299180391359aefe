"""
Finite-difference verification of analytic gradients.

The scalar checked is L = sum(output * R) for a fixed random projection R,
so dL/doutput = R. Entries whose perturbation flips a ReLU mask or a
max-pool argmax are skipped; the derivative is not defined across a kink.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from deepprior.neuralnet.layers import Layer
from deepprior.neuralnet.network import Network

ABS_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_relative_error: float = 0.0
    per_tensor: Dict[str, float] = field(default_factory=dict)
    checked: int = 0
    skipped: int = 0
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance

    def record(self, name: str, error: float):
        self.per_tensor[name] = max(self.per_tensor.get(name, 0.0), error)
        self.max_relative_error = max(self.max_relative_error, error)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), ABS_FLOOR)


class _LayerAdapter:
    """Gives a bare layer the forward/backward/signature surface of a Network."""

    def __init__(self, layer: Layer):
        self.layer = layer

    def forward(self, x, train=False, rng=None):
        return self.layer.forward(x, train, rng)

    def backward(self, dout):
        self.layer.zero_grad()
        return self.layer.backward(dout)

    def parameters(self):
        return dict(self.layer.params)

    def gradients(self):
        return dict(self.layer.grads)

    def signature(self):
        sig = self.layer.signature()
        return np.zeros(0) if sig is None else np.asarray(sig).reshape(-1)


def gradient_check(
    target: Union[Network, Layer],
    inputs: np.ndarray,
    tolerance: float = 1e-4,
    step: float = 1e-5,
    max_checks: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compare analytic and central-difference gradients for the input and
    every parameter tensor. ``max_checks`` caps the entries sampled per
    tensor (all entries when None). Use double precision.
    """
    model = target if isinstance(target, Network) else _LayerAdapter(target)
    rng = np.random.default_rng(seed)
    x = np.array(inputs, dtype=np.float64)

    out = model.forward(x)
    projection = rng.standard_normal(out.shape)
    base_signature = model.signature().copy()
    dx = model.backward(projection.reshape(out.shape))
    grads = {name: g.copy() for name, g in model.gradients().items()}

    def scalar() -> Optional[float]:
        value = float(np.sum(model.forward(x) * projection))
        sig = model.signature()
        if sig.shape != base_signature.shape or np.any(sig != base_signature):
            return None
        return value

    report = GradCheckReport(tolerance=tolerance)
    tensors = [("input", x, dx)] + [(name, p, grads[name]) for name, p in model.parameters().items()]
    for name, array, analytic in tensors:
        flat = array.reshape(-1)
        indices = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            indices = rng.choice(flat.size, size=max_checks, replace=False)
        analytic_flat = np.asarray(analytic).reshape(-1)
        for i in indices:
            original = flat[i]
            flat[i] = original + step
            plus = scalar()
            flat[i] = original - step
            minus = scalar()
            flat[i] = original
            if plus is None or minus is None:
                report.skipped += 1
                continue
            numeric = (plus - minus) / (2 * step)
            report.record(name, relative_error(float(analytic_flat[i]), numeric))
            report.checked += 1
    # leave caches consistent with the unperturbed input
    model.forward(x)
    return report
