"""
PCA pose prior.

Poses are flattened 3J vectors in cube-normalized units. The prior is
the sample mean plus the top-k eigenvectors of the sample covariance;
each component is sign-normalized so that its largest-magnitude entry is
positive, which makes fitted priors comparable across runs.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from deepprior.config import PCA_COMPONENTS
from deepprior.errors import DimensionError, InsufficientDataError, ShapeError

logger = logging.getLogger(__name__)

EIGEN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PcaPrior:
    mean: np.ndarray         # (3J,)
    components: np.ndarray   # (k, 3J), orthonormal rows
    eigenvalues: np.ndarray  # (k,), non-increasing

    @property
    def k(self) -> int:
        return int(self.components.shape[0])

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def num_joints(self) -> int:
        return self.dim // 3

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaPrior":
        return cls(
            np.asarray(data["mean"], dtype=np.float64),
            np.asarray(data["components"], dtype=np.float64).reshape(len(data["eigenvalues"]), -1),
            np.asarray(data["eigenvalues"], dtype=np.float64),
        )


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so that its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(len(vectors)), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def fit_pca(poses: np.ndarray, k: int = PCA_COMPONENTS) -> PcaPrior:
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim != 2:
        raise ShapeError(f"Pose matrix must be N x 3J, got shape {poses.shape}")
    n, dim = poses.shape
    if k > dim:
        raise DimensionError(f"Cannot fit {k} components to {dim}-dimensional poses")
    if n <= k:
        raise InsufficientDataError(f"Need more than {k} poses to fit {k} components, got {n}")

    mean = poses.mean(axis=0)
    centered = poses - mean
    covariance = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1][:k]
    values = eigenvalues[order]
    values[np.abs(values) < EIGEN_TOLERANCE] = 0.0
    components = _fix_signs(eigenvectors[:, order].T)
    logger.debug(f"Fitted {k}-component prior on {n} poses, "
                 f"captured variance {values.sum():.4g} of {np.trace(covariance):.4g}")
    return PcaPrior(mean, np.ascontiguousarray(components), np.maximum(values, 0.0))


def embed(prior: PcaPrior, pose: np.ndarray) -> np.ndarray:
    """Prior coefficients of one pose vector (3J,) or a batch (N, 3J)."""
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape[-1] != prior.dim:
        raise ShapeError(f"Pose vector of length {pose.shape[-1]} does not match prior dimension {prior.dim}")
    return (pose - prior.mean) @ prior.components.T


def reconstruct(prior: PcaPrior, coefficients: np.ndarray) -> np.ndarray:
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape[-1] != prior.k:
        raise ShapeError(f"Got {coefficients.shape[-1]} coefficients for a {prior.k}-component prior")
    return prior.mean + coefficients @ prior.components


def reconstruction_error(prior: PcaPrior, poses: np.ndarray) -> float:
    """Mean squared residual of projecting poses onto the prior's affine span."""
    poses = np.atleast_2d(np.asarray(poses, dtype=np.float64))
    residual = poses - reconstruct(prior, embed(prior, poses))
    return float(np.mean(np.sum(residual * residual, axis=1)))


def init_output_layer(prior: PcaPrior) -> Tuple[np.ndarray, np.ndarray]:
    """Weights (3J, k) and bias (3J,) turning k coefficients into a pose."""
    return prior.components.T.copy(), prior.mean.copy()
