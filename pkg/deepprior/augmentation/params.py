from dataclasses import dataclass, field
from typing import FrozenSet

import numpy as np

from deepprior.errors import DomainError
from deepprior.models.run_config import AugmentConfig


@dataclass(frozen=True)
class AugmentParams:
    """One draw of augmentation parameters."""
    angle: float = 0.0                 # in-plane rotation, degrees
    scale: float = 1.0                 # cube size factor
    offset: tuple = (0.0, 0.0, 0.0)    # cube centre shift, mm
    flags: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError(f"Augmentation scale must be positive, got {self.scale}")
        object.__setattr__(self, "offset", tuple(float(o) for o in self.offset))

    @property
    def is_identity(self) -> bool:
        return self.angle == 0.0 and self.scale == 1.0 and not any(self.offset)


IDENTITY = AugmentParams()


def active_flags(cfg: AugmentConfig) -> FrozenSet[str]:
    flags = set()
    if cfg.enable_rotation:
        flags.add("R")
    if cfg.enable_translation:
        flags.add("T")
    if cfg.enable_scale:
        flags.add("S")
    return frozenset(flags)


def sample_params(cfg: AugmentConfig, rng: np.random.Generator) -> AugmentParams:
    """Draw rotation, scale and translation; disabled transforms stay at identity."""
    angle, scale, offset = 0.0, 1.0, (0.0, 0.0, 0.0)
    if cfg.enable_rotation:
        angle = float(rng.uniform(-cfg.rotation_range_deg, cfg.rotation_range_deg))
    if cfg.enable_scale:
        # a non-positive draw is only possible for huge sigmas; keep the cube valid
        scale = max(float(rng.normal(1.0, cfg.effective_scale_sigma())), 1e-3)
    if cfg.enable_translation:
        offset = tuple(rng.normal(0.0, cfg.effective_translation_sigma(), size=3))
    return AugmentParams(angle, scale, offset, active_flags(cfg))


def sample_params_batch(cfg: AugmentConfig, rng: np.random.Generator, n: int):
    """Vectorized draws: angles (n,), scales (n,), offsets (n, 3)."""
    angles = (rng.uniform(-cfg.rotation_range_deg, cfg.rotation_range_deg, size=n)
              if cfg.enable_rotation else np.zeros(n))
    scales = (np.maximum(rng.normal(1.0, cfg.effective_scale_sigma(), size=n), 1e-3)
              if cfg.enable_scale else np.ones(n))
    offsets = (rng.normal(0.0, cfg.effective_translation_sigma(), size=(n, 3))
               if cfg.enable_translation else np.zeros((n, 3)))
    return angles, scales, offsets


def invert_params(params: AugmentParams) -> AugmentParams:
    """Parameters undoing augment_pose(., params, pivot) for the same pivot."""
    theta = np.deg2rad(-params.angle)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    offset = -(rot @ np.asarray(params.offset)) / params.scale
    return AugmentParams(-params.angle, 1.0 / params.scale, tuple(offset), params.flags)
