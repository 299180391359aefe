"""
Run configuration schema.

A run is described by a single JSON document; each section below maps to
one object in that document. Unknown keys are rejected so typos surface
as configuration errors instead of silently falling back to defaults.
"""

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import ValidationError
from sqlmodel import Field, SQLModel

from deepprior.config import (
    BATCH_SIZE,
    CUBE_SIZE_MM,
    DEEPPRIOR_DTYPE,
    EPOCHS,
    LEARNING_RATE,
    PCA_COMPONENTS,
    ROBUST_PRIOR_SAMPLES,
    SEGMENT_EXTENT_MM,
)
from deepprior.errors import ConfigError


class _Section(SQLModel):
    model_config = {"extra": "forbid", "validate_assignment": True}


class AugmentConfig(_Section):
    """Online augmentation switches and distributions."""

    enable_rotation: bool = True
    enable_scale: bool = True
    enable_translation: bool = True
    rotation_range_deg: float = Field(default=180.0, ge=0.0, le=180.0)
    scale_sigma: float = Field(default=0.02, ge=0.0)
    translation_sigma_mm: float = Field(default=5.0, ge=0.0)
    # "std" reads the sigmas as standard deviations, "variance" as variances
    sigma_reading: Literal["std", "variance"] = "std"
    seed: int = 0

    @property
    def any_enabled(self) -> bool:
        return self.enable_rotation or self.enable_scale or self.enable_translation

    def effective_scale_sigma(self) -> float:
        if self.sigma_reading == "variance":
            return self.scale_sigma ** 0.5
        return self.scale_sigma

    def effective_translation_sigma(self) -> float:
        if self.sigma_reading == "variance":
            return self.translation_sigma_mm ** 0.5
        return self.translation_sigma_mm

    @classmethod
    def from_flags(cls, flags: str, **overrides) -> "AugmentConfig":
        """Build from a flag string such as "RTS", "T" or "" (no augmentation)."""
        flags = flags.upper()
        unknown = set(flags) - set("RTS")
        if unknown:
            raise ConfigError(f"Unknown augmentation flags: {''.join(sorted(unknown))}")
        return cls(
            enable_rotation="R" in flags,
            enable_translation="T" in flags,
            enable_scale="S" in flags,
            **overrides,
        )


class ArchitectureConfig(_Section):
    preset: Literal["resnet", "original", "original_more_filters"] = "resnet"
    scale: Literal["desk", "full"] = "desk"
    block: Literal["bottleneck", "basic"] = "bottleneck"
    fc_width: Optional[int] = Field(default=None, gt=0)
    dropout_rate: float = Field(default=0.3, ge=0.0, lt=1.0)
    pca_components: int = Field(default=PCA_COMPONENTS, gt=0)
    freeze_prior: bool = False
    robust_prior: bool = True
    robust_prior_samples: int = Field(default=ROBUST_PRIOR_SAMPLES, gt=0)

    def input_size(self) -> int:
        return 64 if self.scale == "desk" else 128


class OptimizerConfig(_Section):
    learning_rate: float = Field(default=LEARNING_RATE, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    epochs: int = Field(default=EPOCHS, ge=0)
    batch_size: int = Field(default=BATCH_SIZE, gt=0)


class EvaluationConfig(_Section):
    threshold_max_mm: float = Field(default=80.0, gt=0.0)
    threshold_step_mm: float = Field(default=1.0, gt=0.0)
    localization: Literal["com", "refined", "ground_truth", "perturbed"] = "com"
    localization_noise_mm: float = Field(default=5.0, ge=0.0)
    cube_size_mm: float = Field(default=CUBE_SIZE_MM, gt=0.0)
    segment_extent_mm: float = Field(default=SEGMENT_EXTENT_MM, gt=0.0)
    refine_iterations: int = Field(default=1, ge=1)

    def thresholds(self) -> np.ndarray:
        count = int(round(self.threshold_max_mm / self.threshold_step_mm)) + 1
        return np.arange(count, dtype=np.float64) * self.threshold_step_mm


class SceneConfig(_Section):
    """Synthetic camera and scene settings."""

    width: int = Field(default=160, gt=0)
    height: int = Field(default=120, gt=0)
    fx: float = Field(default=140.0, gt=0.0)
    fy: float = Field(default=140.0, gt=0.0)
    cx: float = Field(default=80.0, ge=0.0)
    cy: float = Field(default=60.0, ge=0.0)
    distance_min_mm: float = Field(default=450.0, gt=0.0)
    distance_max_mm: float = Field(default=650.0, gt=0.0)
    max_roll_deg: float = Field(default=40.0, ge=0.0, le=180.0)
    max_tilt_deg: float = Field(default=20.0, ge=0.0, le=90.0)
    max_flexion_deg: float = Field(default=80.0, ge=0.0, le=120.0)
    max_abduction_deg: float = Field(default=15.0, ge=0.0, le=45.0)
    missing_probability: float = Field(default=0.02, ge=0.0, le=1.0)
    depth_jitter_mm: float = Field(default=1.0, ge=0.0)
    background_depth_mm: float = Field(default=1200.0, gt=0.0)
    subject_scale_spread: float = Field(default=0.12, ge=0.0, lt=1.0)
    seed: int = 0


class RunConfig(_Section):
    """Complete description of a run."""

    augmentation: AugmentConfig = Field(default_factory=AugmentConfig)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    refiner_epochs: int = Field(default=EPOCHS, ge=0)
    dtype: Literal["float32", "float64"] = DEEPPRIOR_DTYPE  # type: ignore[assignment]
    seed: int = 0

    @classmethod
    def load(cls, path: Union[str, Path, None]) -> "RunConfig":
        """Read a JSON config document; None yields the defaults."""
        if path is None:
            return cls()
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        return cls.parse(data)

    @classmethod
    def parse(cls, data: dict) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid run configuration: {e}") from e

    def with_overrides(self, **sections) -> "RunConfig":
        """Copy with nested overrides, e.g. optimizer={"epochs": 0}."""
        data = self.model_dump()
        for key, value in sections.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key].update(value)
            else:
                data[key] = value
        return self.parse(data)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()
