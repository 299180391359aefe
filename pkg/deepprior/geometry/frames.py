from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from deepprior.errors import DomainError, ShapeError
from deepprior.geometry.camera import CameraIntrinsics

# Raw depth value marking a pixel without a measurement
MISSING_DEPTH = 0


@dataclass
class DepthFrame:
    """Depth image in millimetres, row-major (height x width); 0 marks missing pixels."""
    depth: np.ndarray
    intrinsics: Optional[CameraIntrinsics] = None

    def __post_init__(self):
        self.depth = np.asarray(self.depth)
        if self.depth.ndim != 2:
            raise ShapeError(f"Depth grid must be 2-D, got shape {self.depth.shape}")
        if np.any(self.depth < 0):
            raise DomainError("Depth values must be non-negative (0 = missing)")

    @property
    def height(self) -> int:
        return int(self.depth.shape[0])

    @property
    def width(self) -> int:
        return int(self.depth.shape[1])

    def valid_mask(self) -> np.ndarray:
        return self.depth != MISSING_DEPTH

    def as_float(self) -> np.ndarray:
        return self.depth.astype(np.float64)


@dataclass
class Pose3D:
    """J ordered joints in camera-space mm. Joint 0 is the middle-finger MCP."""
    joints: np.ndarray = field(default_factory=lambda: np.zeros((1, 3)))

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.ndim != 2 or self.joints.shape[1] != 3 or self.joints.shape[0] < 1:
            raise ShapeError(f"Pose must be a (J, 3) array with J >= 1, got {self.joints.shape}")

    @property
    def num_joints(self) -> int:
        return int(self.joints.shape[0])

    @property
    def reference(self) -> np.ndarray:
        """The middle-finger MCP used as the hand referential."""
        return self.joints[0]

    def flatten(self) -> np.ndarray:
        return self.joints.reshape(-1)

    @classmethod
    def from_flat(cls, vector: np.ndarray) -> "Pose3D":
        vector = np.asarray(vector, dtype=np.float64).reshape(-1)
        if vector.size % 3 != 0:
            raise ShapeError(f"Flat pose length {vector.size} is not a multiple of 3")
        return cls(vector.reshape(-1, 3))
