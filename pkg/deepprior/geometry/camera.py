"""
Pinhole camera model.

Points are in camera space millimetres with +z pointing away from the
camera; pixel coordinates have u along image columns and v along rows.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from deepprior.errors import DomainError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths and principal point in pixels plus sensor resolution."""
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DomainError(
                f"Principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} sensor"
            )

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }


def project(points: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """
    Project camera-space points to (u, v, d).

    Accepts a single point of shape (3,) or an array of shape (..., 3).
    """
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    if np.any(z <= 0):
        raise DomainError("Cannot project a point with non-positive depth")
    out = np.empty_like(points)
    out[..., 0] = points[..., 0] * k.fx / z + k.cx
    out[..., 1] = points[..., 1] * k.fy / z + k.cy
    out[..., 2] = z
    return out


def backproject(u, v, d, k: CameraIntrinsics) -> np.ndarray:
    """Inverse of project: pixel coordinates plus depth in mm to camera-space points."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise DomainError("Cannot backproject a pixel with non-positive depth")
    x = (u - k.cx) * d / k.fx
    y = (v - k.cy) * d / k.fy
    return np.stack(np.broadcast_arrays(x, y, d), axis=-1)


def backproject_uvd(uvd: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """Backproject an array of (u, v, d) rows."""
    uvd = np.asarray(uvd, dtype=np.float64)
    return backproject(uvd[..., 0], uvd[..., 1], uvd[..., 2], k)


def rotate2d(uv: np.ndarray, center: Tuple[float, float], angle_deg: float) -> np.ndarray:
    """Rotate pixel coordinates (..., 2) about center by angle (degrees)."""
    uv = np.asarray(uv, dtype=np.float64)
    theta = np.deg2rad(angle_deg)
    c, s = np.cos(theta), np.sin(theta)
    du = uv[..., 0] - center[0]
    dv = uv[..., 1] - center[1]
    out = np.empty_like(uv)
    out[..., 0] = center[0] + c * du - s * dv
    out[..., 1] = center[1] + s * du + c * dv
    return out
