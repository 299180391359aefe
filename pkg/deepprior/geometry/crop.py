"""
Cube cropping and normalization.

A CropCube is an axis-aligned cube in camera space. Its image window is
centred on the projection of the cube centre and just wide enough to
cover every projected cube corner, so off-axis cubes get a window larger
than the bare bounding box of the corners. The window is resampled with
nearest-neighbour lookup into a square patch of normalized depths.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from deepprior.config import CUBE_SIZE_MM, PATCH_SIZE
from deepprior.errors import DomainError, EmptyCropError, ShapeError
from deepprior.geometry.camera import CameraIntrinsics, project
from deepprior.geometry.frames import DepthFrame, MISSING_DEPTH, Pose3D

# Patch value for missing pixels and pixels behind the cube
BACKGROUND_VALUE = 1.0
MIN_RESOLUTION = 8


@dataclass(frozen=True)
class CropCube:
    center: tuple
    size: float = CUBE_SIZE_MM

    def __post_init__(self):
        center = tuple(float(c) for c in np.asarray(self.center, dtype=np.float64).reshape(-1))
        if len(center) != 3:
            raise ShapeError(f"Cube center must have 3 coordinates, got {len(center)}")
        object.__setattr__(self, "center", center)
        if self.size <= 0:
            raise DomainError(f"Cube size must be positive, got {self.size}")
        if center[2] <= self.size / 2:
            raise DomainError(
                f"Cube at z={center[2]:.1f}mm with size {self.size:.1f}mm reaches behind the camera"
            )

    @property
    def half(self) -> float:
        return self.size / 2.0

    @property
    def center_array(self) -> np.ndarray:
        return np.array(self.center, dtype=np.float64)

    def corners(self) -> np.ndarray:
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                         dtype=np.float64)
        return self.center_array + signs * self.half

    def translated(self, offset) -> "CropCube":
        return CropCube(tuple(self.center_array + np.asarray(offset, dtype=np.float64)), self.size)

    def scaled(self, factor: float) -> "CropCube":
        return CropCube(self.center, self.size * factor)


@dataclass(frozen=True)
class CropWindow:
    """Image-space window of a cube: centre and half extents in pixels."""
    uc: float
    vc: float
    half_width: float
    half_height: float

    def pixel_grid(self, resolution: int):
        """Image coordinates (u, v) of the centres of the patch pixels."""
        steps = (np.arange(resolution, dtype=np.float64) + 0.5) / resolution * 2.0 - 1.0
        u = self.uc + steps * self.half_width
        v = self.vc + steps * self.half_height
        return np.meshgrid(u, v)


@dataclass
class NormalizedPatch:
    """Square patch of depths normalized to [-1, 1] and the cube that produced it."""
    values: np.ndarray
    cube: CropCube
    intrinsics: CameraIntrinsics
    window: CropWindow

    @property
    def resolution(self) -> int:
        return int(self.values.shape[0])


def crop_window(cube: CropCube, k: CameraIntrinsics) -> CropWindow:
    corners = project(cube.corners(), k)
    center = project(cube.center_array, k)
    half_w = float(np.max(np.abs(corners[:, 0] - center[0])))
    half_h = float(np.max(np.abs(corners[:, 1] - center[1])))
    return CropWindow(float(center[0]), float(center[1]), half_w, half_h)


def normalize_depths(depth: np.ndarray, cube: CropCube) -> np.ndarray:
    """Map raw depths (mm, 0 = missing) to [-1, 1] relative to the cube."""
    depth = np.asarray(depth, dtype=np.float64)
    back = cube.center[2] + cube.half
    values = np.clip((depth - cube.center[2]) / cube.half, -1.0, 1.0)
    values[(depth == MISSING_DEPTH) | (depth > back)] = BACKGROUND_VALUE
    return values


def sample_frame(frame: DepthFrame, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Nearest-neighbour lookup of raw depths; pixels off the frame read as missing."""
    cols = np.floor(u + 0.5).astype(np.int64)
    rows = np.floor(v + 0.5).astype(np.int64)
    inside = (cols >= 0) & (cols < frame.width) & (rows >= 0) & (rows < frame.height)
    if not np.any(inside):
        raise EmptyCropError("Crop window lies entirely outside the depth frame")
    raw = np.full(u.shape, float(MISSING_DEPTH))
    raw[inside] = frame.depth[rows[inside], cols[inside]]
    return raw


def extract_crop(
    frame: DepthFrame,
    cube: CropCube,
    k: Optional[CameraIntrinsics] = None,
    resolution: int = PATCH_SIZE,
) -> NormalizedPatch:
    """Cut the cube out of the frame and resample it to resolution x resolution."""
    k = k or frame.intrinsics
    if k is None:
        raise DomainError("Camera intrinsics are required to crop a frame")
    if resolution < MIN_RESOLUTION:
        raise DomainError(f"Patch resolution must be at least {MIN_RESOLUTION}, got {resolution}")

    window = crop_window(cube, k)
    u, v = window.pixel_grid(resolution)
    raw = sample_frame(frame, u, v)
    return NormalizedPatch(normalize_depths(raw, cube), cube, k, window)


def normalize_joints(pose: Pose3D, cube: CropCube) -> np.ndarray:
    """Flat 3J vector of joint coordinates relative to the cube, in cube half-sizes."""
    return ((pose.joints - cube.center_array) / cube.half).reshape(-1)


def denormalize_joints(vector: np.ndarray, cube: CropCube, num_joints: Optional[int] = None) -> Pose3D:
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    if vector.size % 3 != 0 or (num_joints is not None and vector.size != 3 * num_joints):
        expected = f"3*{num_joints}" if num_joints is not None else "a multiple of 3"
        raise ShapeError(f"Normalized pose has length {vector.size}, expected {expected}")
    return Pose3D(vector.reshape(-1, 3) * cube.half + cube.center_array)
