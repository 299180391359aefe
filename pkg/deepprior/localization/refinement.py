"""
Learned refinement of the hand location and frame-to-frame tracking.

The refinement network sees the crop centred on the current estimate and
predicts the offset to the middle-finger MCP joint in cube-normalized
units.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from deepprior.config import CUBE_SIZE_MM, SEGMENT_EXTENT_MM
from deepprior.errors import EmptyCropError, NoHandError, ShapeError
from deepprior.geometry.camera import CameraIntrinsics
from deepprior.geometry.crop import CropCube, extract_crop
from deepprior.geometry.frames import DepthFrame
from deepprior.localization.segmentation import HandLocation, LocationSource, locate_center_of_mass
from deepprior.neuralnet.network import Network

logger = logging.getLogger(__name__)


def _offset(net: Network, frame: DepthFrame, center: np.ndarray, cube_size: float,
            k: Optional[CameraIntrinsics]) -> np.ndarray:
    if net.output_dim != 3:
        raise ShapeError(f"Refinement network must output 3 values, got {net.output_dim}")
    resolution = net.input_shape[1]
    patch = extract_crop(frame, CropCube(tuple(center), cube_size), k, resolution)
    return net.forward(patch.values[None, None], train=False)[0].astype(np.float64)


def refine_location(
    frame: DepthFrame,
    loc: HandLocation,
    net: Network,
    c_size: float = CUBE_SIZE_MM,
    k: Optional[CameraIntrinsics] = None,
    iterations: int = 1,
    source: LocationSource = LocationSource.REFINED,
) -> HandLocation:
    """Move ``loc`` by the offset the network predicts, ``iterations`` times."""
    point = loc.array
    for _ in range(iterations):
        point = point + _offset(net, frame, point, c_size, k) * (c_size / 2.0)
    return HandLocation(tuple(point), source)


def track(
    prev: HandLocation,
    frame: DepthFrame,
    net: Network,
    c_size: float = CUBE_SIZE_MM,
    k: Optional[CameraIntrinsics] = None,
    iterations: int = 1,
) -> HandLocation:
    """Refine starting from the previous frame's location instead of a fresh CoM."""
    return refine_location(frame, prev, net, c_size, k, iterations, LocationSource.TRACKED)


class HandTracker:
    """
    Per-stream tracking state. Falls back to centre of mass + refinement
    whenever tracking from the previous location fails.
    """

    def __init__(self, net: Network, c_size: float = CUBE_SIZE_MM, k: Optional[CameraIntrinsics] = None,
                 extent: float = SEGMENT_EXTENT_MM, iterations: int = 1):
        self.net = net
        self.c_size = c_size
        self.k = k
        self.extent = extent
        self.iterations = iterations
        self.previous: Optional[HandLocation] = None
        self.fallbacks = 0

    def reset(self):
        self.previous = None

    def update(self, frame: DepthFrame) -> HandLocation:
        if self.previous is not None:
            try:
                self.previous = track(self.previous, frame, self.net, self.c_size, self.k, self.iterations)
                return self.previous
            except EmptyCropError:
                self.fallbacks += 1
                logger.warning("Tracking lost the hand, relocalizing from centre of mass")
        com = locate_center_of_mass(frame, self.k, self.extent)
        self.previous = refine_location(frame, com, self.net, self.c_size, self.k, self.iterations)
        return self.previous


def localization_error(locations: Sequence[HandLocation], references: Sequence[np.ndarray]) -> float:
    """Mean 3D distance in mm between estimated and reference hand locations."""
    if len(locations) != len(references):
        raise ShapeError(f"{len(locations)} locations for {len(references)} references")
    if not locations:
        raise NoHandError("No locations to compare")
    est = np.stack([loc.array for loc in locations])
    ref = np.asarray(references, dtype=np.float64).reshape(len(references), 3)
    return float(np.mean(np.linalg.norm(est - ref, axis=1)))
