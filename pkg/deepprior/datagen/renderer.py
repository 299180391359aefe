"""
Z-buffer depth rendering of the synthetic hand.

Bones are rendered as chains of overlapping spheres (a close approximation
of capsules), intersected analytically with the pixel rays. A
fronto-parallel background plane sits behind the hand.
"""

import logging
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from deepprior.datagen.hand_model import HandModel, forward_kinematics
from deepprior.errors import OutOfViewError
from deepprior.geometry.camera import CameraIntrinsics
from deepprior.geometry.frames import DepthFrame, MISSING_DEPTH, Pose3D
from deepprior.models.run_config import SceneConfig

logger = logging.getLogger(__name__)

# Sphere spacing along a bone, as a fraction of the bone radius
SPHERE_SPACING = 0.3
MAX_DEPTH_MM = 65535


def scene_intrinsics(cfg: SceneConfig) -> CameraIntrinsics:
    return CameraIntrinsics(cfg.fx, cfg.fy, cfg.cx, cfg.cy, cfg.width, cfg.height)


def hand_spheres(model: HandModel, pose: Pose3D) -> np.ndarray:
    """(M, 4) array of sphere centres and radii covering every bone."""
    spheres = []
    joints = pose.joints
    for parent, child, radius in model.bones():
        a, b = joints[parent], joints[child]
        count = max(2, int(np.ceil(np.linalg.norm(b - a) / (SPHERE_SPACING * radius))) + 1)
        for t in np.linspace(0.0, 1.0, count):
            spheres.append((*(a + t * (b - a)), radius))
    return np.asarray(spheres, dtype=np.float64)


def render_spheres(spheres: Iterable, k: CameraIntrinsics,
                   background_depth: Optional[float] = None) -> np.ndarray:
    """Nearest-surface depth (float mm) per pixel; background or 0 where no sphere is hit."""
    fill = float(background_depth) if background_depth is not None else np.inf
    zbuf = np.full((k.height, k.width), fill)
    for cx, cy, cz, r in np.asarray(spheres, dtype=np.float64).reshape(-1, 4):
        if cz - r <= 0:
            raise OutOfViewError(f"Sphere at z={cz:.1f}mm reaches behind the camera")
        reach_u = r * k.fx / (cz - r) + 1.0
        reach_v = r * k.fy / (cz - r) + 1.0
        u0 = cx * k.fx / cz + k.cx
        v0 = cy * k.fy / cz + k.cy
        c0, c1 = max(int(np.floor(u0 - reach_u)), 0), min(int(np.ceil(u0 + reach_u)) + 1, k.width)
        r0, r1 = max(int(np.floor(v0 - reach_v)), 0), min(int(np.ceil(v0 + reach_v)) + 1, k.height)
        if c0 >= c1 or r0 >= r1:
            continue
        uu, vv = np.meshgrid(np.arange(c0, c1, dtype=np.float64), np.arange(r0, r1, dtype=np.float64))
        dx = (uu - k.cx) / k.fx
        dy = (vv - k.cy) / k.fy
        a = dx * dx + dy * dy + 1.0
        b = dx * cx + dy * cy + cz
        c = cx * cx + cy * cy + cz * cz - r * r
        disc = b * b - a * c
        hit = disc >= 0
        t = np.where(hit, (b - np.sqrt(np.where(hit, disc, 0.0))) / a, np.inf)
        region = zbuf[r0:r1, c0:c1]
        np.minimum(region, t, out=region)
    zbuf[np.isinf(zbuf)] = MISSING_DEPTH
    return zbuf


def apply_noise(depth: np.ndarray, cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Gaussian depth jitter on measured pixels, then random dropouts, quantized to whole mm."""
    measured = depth != MISSING_DEPTH
    noisy = depth.copy()
    if cfg.depth_jitter_mm > 0:
        noisy[measured] += rng.normal(0.0, cfg.depth_jitter_mm, size=int(measured.sum()))
    if cfg.missing_probability > 0:
        noisy[rng.random(depth.shape) < cfg.missing_probability] = MISSING_DEPTH
    return noisy


def quantize(depth: np.ndarray) -> np.ndarray:
    measured = depth != MISSING_DEPTH
    out = np.zeros(depth.shape, dtype=np.uint16)
    out[measured] = np.clip(np.rint(depth[measured]), 1, MAX_DEPTH_MM).astype(np.uint16)
    return out


def check_in_view(model: HandModel, pose: Pose3D, k: CameraIntrinsics):
    joints = pose.joints
    margin = model.finger_radius
    if np.any(joints[:, 2] <= margin):
        raise OutOfViewError("Hand reaches behind the camera")
    u = joints[:, 0] * k.fx / joints[:, 2] + k.cx
    v = joints[:, 1] * k.fy / joints[:, 2] + k.cy
    if np.any(u < 0) or np.any(u > k.width - 1) or np.any(v < 0) or np.any(v > k.height - 1):
        raise OutOfViewError("Hand joints project outside the frame")


def render_depth(
    model: HandModel,
    angles: Dict[str, float],
    root: np.ndarray,
    cfg: SceneConfig,
    rng: Optional[np.random.Generator] = None,
    noise: bool = True,
) -> Tuple[DepthFrame, Pose3D]:
    """Rendered depth frame (uint16 mm) and the ground-truth joints."""
    k = scene_intrinsics(cfg)
    pose = forward_kinematics(model, angles, root)
    check_in_view(model, pose, k)
    depth = render_spheres(hand_spheres(model, pose), k, cfg.background_depth_mm)
    if noise:
        depth = apply_noise(depth, cfg, rng if rng is not None else np.random.default_rng(cfg.seed))
    return DepthFrame(quantize(depth), k), pose
