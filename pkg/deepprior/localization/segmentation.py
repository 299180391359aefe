"""
Depth-threshold hand segmentation and centre-of-mass localization.

The hand is assumed to be the closest object to the camera: every pixel
within ``extent`` millimetres behind the nearest valid depth belongs to it.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from deepprior.config import SEGMENT_EXTENT_MM
from deepprior.errors import DomainError, NoHandError
from deepprior.geometry.camera import CameraIntrinsics, backproject
from deepprior.geometry.frames import DepthFrame


class LocationSource(str, Enum):
    CENTER_OF_MASS = "center_of_mass"
    REFINED = "refined"
    TRACKED = "tracked"
    GROUND_TRUTH = "ground_truth"


@dataclass(frozen=True)
class HandLocation:
    point: tuple
    source: LocationSource

    def __post_init__(self):
        point = tuple(float(p) for p in np.asarray(self.point, dtype=np.float64).reshape(-1))
        if len(point) != 3 or point[2] <= 0:
            raise DomainError(f"Hand location must be a 3D point in front of the camera, got {point}")
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "source", LocationSource(self.source))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.point, dtype=np.float64)


def segment_hand(frame: DepthFrame, extent: float = SEGMENT_EXTENT_MM) -> np.ndarray:
    """Boolean mask of pixels with depth in [d_min, d_min + extent]."""
    valid = frame.valid_mask()
    if not np.any(valid):
        raise NoHandError("Depth frame has no valid pixels")
    depth = frame.as_float()
    d_min = depth[valid].min()
    return valid & (depth <= d_min + extent)


def center_of_mass(frame: DepthFrame, mask: np.ndarray, k: CameraIntrinsics = None) -> HandLocation:
    """Mean of the backprojected masked pixels."""
    k = k or frame.intrinsics
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise NoHandError("Segmentation mask is empty")
    points = backproject(cols.astype(np.float64), rows.astype(np.float64),
                         frame.depth[rows, cols].astype(np.float64), k)
    return HandLocation(tuple(points.mean(axis=0)), LocationSource.CENTER_OF_MASS)


def locate_center_of_mass(frame: DepthFrame, k: CameraIntrinsics = None,
                          extent: float = SEGMENT_EXTENT_MM) -> HandLocation:
    return center_of_mass(frame, segment_hand(frame, extent), k)
