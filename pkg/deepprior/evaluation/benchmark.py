"""
Throughput of the localize -> crop -> predict loop.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Union

import numpy as np

from deepprior.config import CUBE_SIZE_MM
from deepprior.errors import InsufficientDataError
from deepprior.geometry.crop import CropCube, extract_crop
from deepprior.geometry.frames import DepthFrame
from deepprior.localization.refinement import HandTracker
from deepprior.localization.segmentation import HandLocation
from deepprior.neuralnet.network import Network

logger = logging.getLogger(__name__)

Localizer = Union[HandTracker, Callable[[DepthFrame], HandLocation]]


@dataclass
class FpsResult:
    mean: float
    std: float
    runs: List[float] = field(default_factory=list)
    frames: int = 0


def _locate(localizer: Localizer, frame: DepthFrame) -> HandLocation:
    if isinstance(localizer, HandTracker):
        return localizer.update(frame)
    return localizer(frame)


def _process(net: Network, localizer: Localizer, frame: DepthFrame, cube_size: float):
    loc = _locate(localizer, frame)
    patch = extract_crop(frame, CropCube(loc.point, cube_size), frame.intrinsics, net.input_shape[1])
    return net.forward(patch.values[None, None], train=False)


def fps_benchmark(
    net: Network,
    localizer: Localizer,
    frames: Sequence[DepthFrame],
    warmup: int = 5,
    runs: int = 5,
    cube_size: float = CUBE_SIZE_MM,
) -> FpsResult:
    """Frames per second over ``runs`` passes, each after ``warmup`` untimed frames."""
    timed = list(frames[warmup:])
    if not timed:
        raise InsufficientDataError(f"No frames left to time after {warmup} warmup frames")
    results = []
    for _ in range(runs):
        if isinstance(localizer, HandTracker):
            localizer.reset()
        for frame in frames[:warmup]:
            _process(net, localizer, frame, cube_size)
        started = time.perf_counter()
        for frame in timed:
            _process(net, localizer, frame, cube_size)
        results.append(len(timed) / (time.perf_counter() - started))
    values = np.asarray(results)
    logger.info(f"{net.kind}: {values.mean():.1f} fps (std {values.std():.1f}) over {runs} runs")
    return FpsResult(float(values.mean()), float(values.std()), results, len(timed))
