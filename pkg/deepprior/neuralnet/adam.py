from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from deepprior.config import LEARNING_RATE
from deepprior.errors import ShapeError, TrainingError


@dataclass
class AdamState:
    """First/second moment estimates per parameter plus the step counter."""
    lr: float = LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState) -> Dict[str, np.ndarray]:
    """
    One bias-corrected ADAM update, applied in place to ``params``.

    Raises TrainingError before touching anything if a gradient is not finite.
    """
    for name, param in params.items():
        g = grads.get(name)
        if g is None or g.shape != param.shape:
            raise ShapeError(f"Gradient for {name} missing or of wrong shape")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"Non-finite gradient for parameter {name} at step {state.step + 1}")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    step_size = state.lr / bc1

    for name, param in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.epsilon
        param -= (step_size * m / denom).astype(param.dtype, copy=False)
    return params
