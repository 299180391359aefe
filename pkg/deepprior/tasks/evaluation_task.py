"""
Localize, predict and score a dataset with a trained pose network.
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from sqlalchemy.exc import SQLAlchemyError
from sqlmodel import select

from deepprior.database import create_db_and_tables, get_session
from deepprior.datagen.dataset import Dataset, load_dataset
from deepprior.datagen.model_io import load_model
from deepprior.errors import ConfigError, DeepPriorError, EmptyCropError, RecordStoreError
from deepprior.evaluation.export import export_report
from deepprior.evaluation.metrics import EvalReport, evaluate_predictions
from deepprior.geometry.crop import CropCube, extract_crop
from deepprior.geometry.frames import Pose3D
from deepprior.localization.refinement import localization_error, refine_location
from deepprior.localization.segmentation import HandLocation, LocationSource, locate_center_of_mass
from deepprior.models.run_config import RunConfig
from deepprior.models.run_record import EvalRecord, EvalRecordRead
from deepprior.neuralnet.network import Network
from deepprior.neuralnet.trainer import predict_batch
from deepprior.tasks.training_task import derive_seed

logger = logging.getLogger(__name__)

LOCALIZATION_MODES = ("com", "refined", "ground_truth", "perturbed")


def localize_dataset(
    dataset: Dataset,
    cfg: RunConfig,
    mode: Optional[str] = None,
    refiner: Optional[Network] = None,
) -> List[HandLocation]:
    """Hand location per frame for one of the localization modes."""
    mode = mode or cfg.evaluation.localization
    ev = cfg.evaluation
    k = dataset.intrinsics
    if mode == "ground_truth":
        return [HandLocation(tuple(p.reference), LocationSource.GROUND_TRUTH) for p in dataset.annotations]
    if mode == "perturbed":
        rng = np.random.default_rng(derive_seed(cfg.seed, 20))
        noise = rng.normal(0.0, ev.localization_noise_mm, size=(len(dataset), 3))
        return [HandLocation(tuple(p.reference + n), LocationSource.GROUND_TRUTH)
                for p, n in zip(dataset.annotations, noise)]
    if mode not in ("com", "refined"):
        raise ConfigError(f"Unknown localization mode '{mode}' (expected one of {LOCALIZATION_MODES})")
    if mode == "refined" and refiner is None:
        raise ConfigError("Refined localization needs a refiner model")

    locations = []
    for frame in dataset.frames:
        loc = locate_center_of_mass(frame, k, ev.segment_extent_mm)
        if mode == "refined":
            loc = refine_location(frame, loc, refiner, ev.cube_size_mm, k, ev.refine_iterations)
        locations.append(loc)
    return locations


def predict_dataset(net: Network, dataset: Dataset, locations: List[HandLocation], cube_size: float) -> List[Pose3D]:
    resolution = net.input_shape[1]
    num_joints = net.output_dim // 3
    patches, missing = [], set()
    for i, (frame, loc) in enumerate(zip(dataset.frames, locations)):
        try:
            patches.append(extract_crop(frame, CropCube(loc.point, cube_size), dataset.intrinsics, resolution))
        except EmptyCropError:
            logger.warning(f"Frame {i}: crop at {loc.point} is empty, predicting the cube centre")
            missing.add(i)
    predicted = iter(predict_batch(net, patches) if patches else [])
    poses = []
    for i, loc in enumerate(locations):
        if i in missing:
            poses.append(Pose3D(np.tile(loc.array, (num_joints, 1))))
        else:
            poses.append(next(predicted))
    return poses


def evaluate_network(
    net: Network,
    dataset: Dataset,
    cfg: RunConfig,
    refiner: Optional[Network] = None,
    label: str = "",
    fingerprint: str = "",
) -> EvalReport:
    locations = localize_dataset(dataset, cfg, refiner=refiner)
    preds = predict_dataset(net, dataset, locations, cfg.evaluation.cube_size_mm)
    report = evaluate_predictions(preds, dataset.annotations, cfg.evaluation.thresholds(),
                                  fingerprint or cfg.fingerprint(), label)
    report.localization_error_mm = localization_error(locations, [p.reference for p in dataset.annotations])
    logger.info(f"Evaluated {label or net.kind} on {len(dataset)} frames: "
                f"{report.average_error_mm:.2f}mm (localization {report.localization_error_mm:.2f}mm)")
    return report


def _store_failure(action: str, error: SQLAlchemyError) -> RecordStoreError:
    logger.error(f"Run records: could not {action}: {error}")
    return RecordStoreError(f"Could not {action} run records: {error.__class__.__name__}: {error}")


def record_report(report: EvalReport, db_url: Optional[str] = None, status: str = "success",
                  message: Optional[str] = None):
    """Store one report row in the run records database."""
    try:
        create_db_and_tables(db_url)
        for session in get_session(db_url):
            session.add(EvalRecord(
                label=report.label or "evaluate",
                fingerprint=report.fingerprint,
                status=status,
                message=message,
                average_error_mm=report.average_error_mm,
                localization_error_mm=report.localization_error_mm,
                fps=report.fps,
                frame_count=report.frame_count,
                per_joint_json=json.dumps([float(e) for e in report.per_joint_mm]),
            ))
            session.commit()
    except SQLAlchemyError as e:
        raise _store_failure("write", e) from e


def record_failure(label: str, message: str, fingerprint: str = "", db_url: Optional[str] = None):
    try:
        create_db_and_tables(db_url)
        for session in get_session(db_url):
            session.add(EvalRecord(label=label, fingerprint=fingerprint, status="error", message=message))
            session.commit()
    except SQLAlchemyError as e:
        raise _store_failure("write", e) from e


def list_records(db_url: Optional[str] = None, limit: int = 20) -> List[EvalRecordRead]:
    """Newest run records first."""
    records = []
    try:
        create_db_and_tables(db_url)
        for session in get_session(db_url):
            rows = session.exec(
                select(EvalRecord).order_by(EvalRecord.created_at.desc()).limit(limit)
            ).all()
            records = [EvalRecordRead.model_validate(row) for row in rows]
    except SQLAlchemyError as e:
        raise _store_failure("read", e) from e
    return records


def run_evaluation(
    model_path: Union[str, Path],
    data_path: Union[str, Path],
    cfg: RunConfig,
    out_path: Optional[Union[str, Path]] = None,
    refiner_path: Optional[Union[str, Path]] = None,
    db_url: Optional[str] = None,
) -> dict:
    try:
        model = load_model(model_path)
        refiner = load_model(refiner_path, expected_kind="refinenet").net if refiner_path else None
        dataset = load_dataset(data_path)
        cube = model.metadata.get("cube_size_mm", cfg.evaluation.cube_size_mm)
        cfg = cfg.with_overrides(evaluation={"cube_size_mm": cube})
        report = evaluate_network(model.net, dataset, cfg, refiner, label=Path(model_path).stem,
                                  fingerprint=model.fingerprint)
    except DeepPriorError as e:
        logger.error(f"Evaluation failed: {e}")
        return {"status": "error", "message": str(e), "error": e}

    if out_path is not None:
        export_report(report, out_path)
    if db_url is not None:
        record_report(report, db_url)
    return {
        "status": "success",
        "report": report,
        "average_error_mm": report.average_error_mm,
        "localization_error_mm": report.localization_error_mm,
        "frames": report.frame_count,
    }
