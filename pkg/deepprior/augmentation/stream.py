"""
Online augmentation stream.

Every epoch yields each base sample exactly once, in dataset order, with
parameters drawn from a generator seeded by (seed, epoch, sample index).
The sequence is therefore reproducible and any sample can be produced
independently of the others.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from deepprior.augmentation.params import IDENTITY, AugmentParams, sample_params
from deepprior.augmentation.transforms import augment
from deepprior.config import CUBE_SIZE_MM, PATCH_SIZE
from deepprior.errors import EmptyCropError, InsufficientDataError
from deepprior.geometry.camera import CameraIntrinsics
from deepprior.geometry.crop import CropCube
from deepprior.geometry.frames import DepthFrame, Pose3D
from deepprior.models.run_config import AugmentConfig

logger = logging.getLogger(__name__)


@dataclass
class BaseSample:
    """A training frame with its annotation and the centre of its crop cube."""
    sample_id: int
    frame: DepthFrame
    pose: Pose3D
    center: np.ndarray
    intrinsics: Optional[CameraIntrinsics] = None


@dataclass
class Sample:
    sample_id: int
    inputs: np.ndarray   # (resolution, resolution) in [-1, 1]
    target: np.ndarray   # normalized 3J vector
    params: AugmentParams


def sample_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, index]))


class AugmentedStream:
    """
    Produces augmented (patch, target) samples per epoch.

    ``target_clip`` bounds the targets (used for localization offsets).
    """

    def __init__(
        self,
        samples: Sequence[BaseSample],
        cfg: AugmentConfig,
        cube_size: float = CUBE_SIZE_MM,
        resolution: int = PATCH_SIZE,
        seed: Optional[int] = None,
        target_clip: Optional[float] = None,
    ):
        if not samples:
            raise InsufficientDataError("Cannot stream an empty dataset")
        self.samples = list(samples)
        self.cfg = cfg
        self.cube_size = cube_size
        self.resolution = resolution
        self.seed = cfg.seed if seed is None else seed
        self.target_clip = target_clip
        self._static: Optional[List[Sample]] = None

    def __len__(self) -> int:
        return len(self.samples)

    def make_sample(self, base: BaseSample, params: AugmentParams) -> Sample:
        cube = CropCube(tuple(base.center), self.cube_size)
        patch, target = augment(base.frame, base.pose, cube, base.intrinsics, params, self.resolution)
        if self.target_clip is not None:
            target = np.clip(target, -self.target_clip, self.target_clip)
        return Sample(base.sample_id, patch.values, target, params)

    def _augmented(self, base: BaseSample, epoch: int, index: int) -> Sample:
        rng = sample_rng(self.seed, epoch, index)
        params = sample_params(self.cfg, rng)
        try:
            return self.make_sample(base, params)
        except EmptyCropError:
            # the drawn offset pushed the cube off the frame; fall back to the raw crop
            logger.debug(f"Sample {base.sample_id} epoch {epoch}: augmented crop empty, using identity")
            return self.make_sample(base, IDENTITY)

    def epoch(self, index: int) -> Iterator[Sample]:
        if not self.cfg.any_enabled:
            if self._static is None:
                self._static = [self.make_sample(base, IDENTITY) for base in self.samples]
            return iter(self._static)
        return (self._augmented(base, index, i) for i, base in enumerate(self.samples))

    def arrays(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        samples = list(self.epoch(index))
        return np.stack([s.inputs for s in samples]), np.stack([s.target for s in samples])


def stream(dataset_samples: Sequence[BaseSample], cfg: AugmentConfig, **kwargs) -> AugmentedStream:
    return AugmentedStream(dataset_samples, cfg, **kwargs)
