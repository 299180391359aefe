"""
Robust prior: PCA over poses augmented in 3D.

Base poses are cube-normalized vectors. Each draw mirrors what crop
augmentation does to a normalized target: rotation about the camera axis
through the reference joint, division by the cube scale factor and a
shift by the negated, normalized cube offset.
"""

import logging
from typing import Optional

import numpy as np

from deepprior.augmentation.params import sample_params_batch
from deepprior.augmentation.transforms import augment_poses_batch
from deepprior.config import CUBE_SIZE_MM, PCA_COMPONENTS, ROBUST_PRIOR_SAMPLES
from deepprior.errors import InsufficientDataError
from deepprior.models.run_config import AugmentConfig
from deepprior.prior.pca import PcaPrior, fit_pca

logger = logging.getLogger(__name__)


def fit_robust_prior(
    poses: np.ndarray,
    cfg: AugmentConfig,
    n_samples: int = ROBUST_PRIOR_SAMPLES,
    k: int = PCA_COMPONENTS,
    rng: Optional[np.random.Generator] = None,
    cube_size: float = CUBE_SIZE_MM,
) -> PcaPrior:
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim != 2 or len(poses) == 0:
        raise InsufficientDataError("Robust prior needs at least one base pose")
    if not cfg.any_enabled:
        return fit_pca(poses, k)

    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    base = poses.reshape(len(poses), -1, 3)
    picks = rng.integers(0, len(base), size=n_samples)
    angles, scales, offsets = sample_params_batch(cfg, rng, n_samples)

    half = cube_size / 2.0
    chosen = base[picks]
    augmented = augment_poses_batch(
        chosen,
        pivots=chosen[:, 0, :],
        angles=angles,
        scales=1.0 / scales,
        offsets=-offsets / (half * scales[:, None]),
    )
    logger.info(f"Fitting robust prior on {n_samples} augmented poses from {len(poses)} base poses")
    return fit_pca(augmented.reshape(n_samples, -1), k)
