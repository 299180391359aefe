"""
Rotation, scaling and translation applied consistently to depth crops
and 3D annotations.

Order of application: translate the cube centre, scale the cube size,
crop, then rotate the patch in-plane about its centre. Annotations are
projected, rotated in 2D about the projected cube centre by the same
angle and backprojected before being normalized against the translated
and scaled cube.
"""

from typing import Optional, Tuple

import numpy as np

from deepprior.augmentation.params import AugmentParams
from deepprior.config import PATCH_SIZE
from deepprior.geometry.camera import CameraIntrinsics, backproject_uvd, project, rotate2d
from deepprior.geometry.crop import (
    BACKGROUND_VALUE, CropCube, NormalizedPatch, extract_crop, normalize_joints,
)
from deepprior.geometry.frames import DepthFrame, Pose3D


def _rotation_z(angle_deg: float) -> np.ndarray:
    theta = np.deg2rad(angle_deg)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate_patch(patch: NormalizedPatch, angle_deg: float) -> NormalizedPatch:
    """
    Rotate patch content about its centre, in image pixel space.

    Nearest-neighbour lookup; pixels whose source falls outside the patch
    take the background value.
    """
    if angle_deg == 0.0:
        return patch
    window, res = patch.window, patch.resolution
    u, v = window.pixel_grid(res)
    # inverse map: output pixel -> source location
    src = rotate2d(np.stack([u, v], axis=-1), (window.uc, window.vc), -angle_deg)
    step_u = 2.0 * window.half_width / res
    step_v = 2.0 * window.half_height / res
    cols = np.floor((src[..., 0] - (window.uc - window.half_width)) / step_u).astype(np.int64)
    rows = np.floor((src[..., 1] - (window.vc - window.half_height)) / step_v).astype(np.int64)
    inside = (cols >= 0) & (cols < res) & (rows >= 0) & (rows < res)
    values = np.full((res, res), BACKGROUND_VALUE)
    values[inside] = patch.values[rows[inside], cols[inside]]
    return NormalizedPatch(values, patch.cube, patch.intrinsics, patch.window)


def rotate_joints(joints: np.ndarray, center_uv: Tuple[float, float], angle_deg: float,
                  k: CameraIntrinsics) -> np.ndarray:
    """Project joints, rotate them in the image about center_uv, backproject at unchanged depth."""
    if angle_deg == 0.0:
        return np.asarray(joints, dtype=np.float64)
    uvd = project(joints, k)
    uvd[..., :2] = rotate2d(uvd[..., :2], center_uv, angle_deg)
    return backproject_uvd(uvd, k)


def augment(
    frame: DepthFrame,
    pose: Pose3D,
    cube: CropCube,
    k: Optional[CameraIntrinsics],
    params: AugmentParams,
    resolution: int = PATCH_SIZE,
) -> Tuple[NormalizedPatch, np.ndarray]:
    """Augmented patch and normalized 3J target for one sample."""
    k = k or frame.intrinsics
    cube = cube.translated(params.offset).scaled(params.scale)
    patch = extract_crop(frame, cube, k, resolution)
    joints = pose.joints
    if params.angle != 0.0:
        patch = rotate_patch(patch, params.angle)
        joints = rotate_joints(joints, (patch.window.uc, patch.window.vc), params.angle, k)
    return patch, normalize_joints(Pose3D(joints), cube)


def augment_pose(pose: Pose3D, params: AugmentParams, pivot) -> Pose3D:
    """Rotate about the camera axis through pivot, scale about pivot, then translate."""
    pivot = np.asarray(pivot, dtype=np.float64)
    moved = (pose.joints - pivot) @ _rotation_z(params.angle).T
    return Pose3D(pivot + params.scale * moved + np.asarray(params.offset))


def augment_poses_batch(poses: np.ndarray, pivots: np.ndarray, angles: np.ndarray,
                        scales: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Vectorized augment_pose over (N, J, 3) poses with per-pose pivots and parameters."""
    theta = np.deg2rad(angles)
    c, s = np.cos(theta), np.sin(theta)
    rel = poses - pivots[:, None, :]
    out = np.empty_like(rel)
    out[..., 0] = c[:, None] * rel[..., 0] - s[:, None] * rel[..., 1]
    out[..., 1] = s[:, None] * rel[..., 0] + c[:, None] * rel[..., 1]
    out[..., 2] = rel[..., 2]
    return pivots[:, None, :] + scales[:, None, None] * out + offsets[:, None, :]
