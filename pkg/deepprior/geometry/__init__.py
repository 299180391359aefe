from .camera import CameraIntrinsics, project, backproject, backproject_uvd, rotate2d
from .frames import DepthFrame, Pose3D, MISSING_DEPTH
from .crop import (
    CropCube, CropWindow, NormalizedPatch, BACKGROUND_VALUE,
    crop_window, extract_crop, normalize_depths, normalize_joints, denormalize_joints,
)

__all__ = [
    "CameraIntrinsics", "project", "backproject", "backproject_uvd", "rotate2d",
    "DepthFrame", "Pose3D", "MISSING_DEPTH",
    "CropCube", "CropWindow", "NormalizedPatch", "BACKGROUND_VALUE",
    "crop_window", "extract_crop", "normalize_depths", "normalize_joints", "denormalize_joints",
]
