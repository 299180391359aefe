"""
Pose accuracy metrics.

Two curves are reported over a threshold grid in mm:

    all_joints         fraction of frames whose worst joint error is within the threshold
    per_frame_average  fraction of frames whose mean joint error is within the threshold
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from deepprior.errors import DomainError, InsufficientDataError, ShapeError
from deepprior.geometry.frames import Pose3D

ALL_JOINTS = "all_joints"
PER_FRAME_AVERAGE = "per_frame_average"
VARIANTS = (ALL_JOINTS, PER_FRAME_AVERAGE)

PoseSet = Union[np.ndarray, Sequence[Pose3D]]


@dataclass
class MetricCurve:
    thresholds: np.ndarray
    fractions: np.ndarray
    variant: str = ALL_JOINTS

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "thresholds": [float(t) for t in self.thresholds],
            "fractions": [float(f) for f in self.fractions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricCurve":
        return cls(np.asarray(data["thresholds"], dtype=np.float64),
                   np.asarray(data["fractions"], dtype=np.float64),
                   data["variant"])


@dataclass
class EvalReport:
    average_error_mm: float
    per_joint_mm: np.ndarray
    curves: Dict[str, MetricCurve]
    frame_count: int
    fingerprint: str = ""
    label: str = ""
    localization_error_mm: Optional[float] = None
    fps: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "fingerprint": self.fingerprint,
            "frame_count": int(self.frame_count),
            "average_error_mm": float(self.average_error_mm),
            "localization_error_mm": self.localization_error_mm,
            "fps": self.fps,
            "per_joint_mm": [float(e) for e in self.per_joint_mm],
            "curves": [self.curves[v].to_dict() for v in VARIANTS if v in self.curves],
            "extras": {k: float(v) for k, v in self.extras.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        curves = [MetricCurve.from_dict(c) for c in data["curves"]]
        return cls(
            average_error_mm=float(data["average_error_mm"]),
            per_joint_mm=np.asarray(data["per_joint_mm"], dtype=np.float64),
            curves={c.variant: c for c in curves},
            frame_count=int(data["frame_count"]),
            fingerprint=data.get("fingerprint", ""),
            label=data.get("label", ""),
            localization_error_mm=data.get("localization_error_mm"),
            fps=data.get("fps"),
            extras=dict(data.get("extras", {})),
        )


def _as_array(poses: PoseSet) -> np.ndarray:
    if isinstance(poses, np.ndarray):
        array = poses.astype(np.float64)
    elif len(poses) == 0:
        array = np.zeros((0, 0, 3))
    else:
        array = np.stack([p.joints if isinstance(p, Pose3D) else np.asarray(p) for p in poses])
    if array.ndim == 2:
        array = array.reshape(array.shape[0], -1, 3)
    if array.ndim != 3 or array.shape[-1] != 3:
        raise ShapeError(f"Expected poses of shape (N, J, 3), got {array.shape}")
    return array.astype(np.float64)


def joint_errors(preds: PoseSet, gts: PoseSet) -> np.ndarray:
    """(N, J) Euclidean distances in mm."""
    p, g = _as_array(preds), _as_array(gts)
    if p.shape != g.shape:
        raise ShapeError(f"Predictions {p.shape} and ground truth {g.shape} differ")
    if p.shape[0] == 0:
        raise InsufficientDataError("No frames to evaluate")
    return np.linalg.norm(p - g, axis=-1)


def average_3d_error(preds: PoseSet, gts: PoseSet) -> float:
    return float(joint_errors(preds, gts).mean())


def per_joint_error(preds: PoseSet, gts: PoseSet) -> np.ndarray:
    return joint_errors(preds, gts).mean(axis=0)


def default_thresholds(max_mm: float = 80.0, step_mm: float = 1.0) -> np.ndarray:
    count = int(round(max_mm / step_mm)) + 1
    return np.arange(count, dtype=np.float64) * step_mm


def curve_from_errors(errors: np.ndarray, thresholds, variant: str = ALL_JOINTS) -> MetricCurve:
    thresholds = np.asarray(thresholds, dtype=np.float64).reshape(-1)
    if thresholds.size == 0 or np.any(np.diff(thresholds) <= 0):
        raise DomainError("Thresholds must be non-empty and strictly increasing")
    if variant == ALL_JOINTS:
        per_frame = errors.max(axis=1)
    elif variant == PER_FRAME_AVERAGE:
        per_frame = errors.mean(axis=1)
    else:
        raise DomainError(f"Unknown curve variant '{variant}' (expected one of {VARIANTS})")
    fractions = (per_frame[:, None] <= thresholds[None, :]).mean(axis=0)
    return MetricCurve(thresholds, fractions, variant)


def fraction_curve(preds: PoseSet, gts: PoseSet, thresholds=None, variant: str = ALL_JOINTS) -> MetricCurve:
    if thresholds is None:
        thresholds = default_thresholds()
    return curve_from_errors(joint_errors(preds, gts), thresholds, variant)


def evaluate_predictions(
    preds: PoseSet,
    gts: PoseSet,
    thresholds=None,
    fingerprint: str = "",
    label: str = "",
) -> EvalReport:
    """Average error, per-joint breakdown and both curves in one report."""
    errors = joint_errors(preds, gts)
    if thresholds is None:
        thresholds = default_thresholds()
    per_joint = errors.mean(axis=0)
    curves: List[MetricCurve] = [curve_from_errors(errors, thresholds, v) for v in VARIANTS]
    return EvalReport(
        average_error_mm=float(errors.mean()),
        per_joint_mm=per_joint,
        curves={c.variant: c for c in curves},
        frame_count=int(errors.shape[0]),
        fingerprint=fingerprint,
        label=label,
    )
