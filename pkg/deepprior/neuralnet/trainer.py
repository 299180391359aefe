"""
Minibatch training loop and inference helpers.
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from deepprior.config import BATCH_SIZE, EPOCHS
from deepprior.errors import ShapeError, TrainingError
from deepprior.geometry.crop import NormalizedPatch, denormalize_joints
from deepprior.geometry.frames import Pose3D
from deepprior.neuralnet.adam import AdamState, adam_step
from deepprior.neuralnet.network import Network

logger = logging.getLogger(__name__)


class EpochStream(Protocol):
    """Anything yielding (inputs, target) samples for a given epoch index."""

    def epoch(self, index: int) -> Iterable: ...


@dataclass
class EpochStats:
    epoch: int
    loss: float
    seconds: float


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error over all batch entries and its gradient w.r.t. pred."""
    if pred.shape != target.shape:
        raise ShapeError(f"Prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


def _collect(samples) -> Tuple[np.ndarray, np.ndarray]:
    inputs, targets = [], []
    for sample in samples:
        inputs.append(sample.inputs)
        targets.append(sample.target)
    if not inputs:
        raise TrainingError("Training stream produced an empty epoch")
    return np.stack(inputs)[:, None], np.stack(targets)


def train(
    net: Network,
    stream: EpochStream,
    epochs: int = EPOCHS,
    batch_size: int = BATCH_SIZE,
    adam: Optional[AdamState] = None,
    seed: int = 0,
    loss: Callable = mse_loss,
    on_epoch: Optional[Callable[[EpochStats], None]] = None,
) -> Tuple[Network, List[float]]:
    """
    Minimize ``loss`` over the stream with ADAM.

    Each epoch draws the stream once, shuffles it and walks it in
    minibatches; dropout is active only inside the training forward pass.
    Returns the network and the mean training loss of every epoch.
    """
    adam = adam or AdamState()
    rng = np.random.default_rng(seed)
    history: List[float] = []

    for epoch in range(epochs):
        started = time.perf_counter()
        inputs, targets = _collect(stream.epoch(epoch))
        inputs = inputs.astype(net.dtype, copy=False)
        targets = targets.astype(net.dtype, copy=False)
        order = rng.permutation(len(inputs))

        total, seen = 0.0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            pred = net.forward(inputs[idx], train=True, rng=rng)
            value, grad = loss(pred, targets[idx])
            if not np.isfinite(value):
                raise TrainingError(f"Loss became non-finite at epoch {epoch}, batch starting {start}")
            net.backward(grad)
            adam_step(net.parameters(trainable_only=True), net.gradients(trainable_only=True), adam)
            total += value * len(idx)
            seen += len(idx)
            logger.debug(f"epoch {epoch} batch {start // batch_size}: loss {value:.6f}")

        epoch_loss = total / seen
        history.append(epoch_loss)
        stats = EpochStats(epoch, epoch_loss, time.perf_counter() - started)
        if on_epoch is not None:
            on_epoch(stats)

    return net, history


def predict_normalized(net: Network, inputs: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Eval-mode forward pass over a stack of patch value grids (N, H, W)."""
    inputs = np.asarray(inputs)
    outputs = [net.forward(inputs[i:i + batch_size, None], train=False)
               for i in range(0, len(inputs), batch_size)]
    return np.concatenate(outputs).astype(np.float64)


def _check_resolution(net: Network, patch: NormalizedPatch):
    if (1, patch.resolution, patch.resolution) != net.input_shape:
        raise ShapeError(f"Patch of resolution {patch.resolution} does not fit network input {net.input_shape}")


def predict(net: Network, patch: NormalizedPatch) -> Pose3D:
    """Predict joints in camera-space mm for one patch."""
    _check_resolution(net, patch)
    output = net.forward(patch.values[None, None], train=False)[0].astype(np.float64)
    return denormalize_joints(output, patch.cube)


def predict_batch(net: Network, patches: Sequence[NormalizedPatch]) -> List[Pose3D]:
    for patch in patches:
        _check_resolution(net, patch)
    outputs = predict_normalized(net, np.stack([p.values for p in patches]))
    return [denormalize_joints(out, patch.cube) for out, patch in zip(outputs, patches)]
