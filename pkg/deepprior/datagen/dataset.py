"""
Synthetic dataset generation and the on-disk dataset container.

Binary file (little-endian):

    magic "DPDS" | version u32 | count u32 | width u32 | height u32 |
    fx, fy, cx, cy f64
    per frame: subject id u32 | width*height depth values u16 (mm, 0 = missing)
    sha256 of everything above (32 bytes)

Annotations live in a sidecar ``<name>.joints.json`` holding the format
version, the checksum of the binary file, one list of [x, y, z] mm
triples per frame and the sha256 of those lists in compact JSON form.
"""

import hashlib
import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from deepprior.config import DEEPPRIOR_THREADS
from deepprior.datagen.hand_model import HandModel, sample_angles, sample_root
from deepprior.datagen.renderer import render_depth, scene_intrinsics
from deepprior.errors import (
    ChecksumError,
    DatasetFormatError,
    InsufficientDataError,
    OutOfViewError,
    ShapeError,
    TruncatedFileError,
    VersionMismatchError,
)
from deepprior.geometry.camera import CameraIntrinsics
from deepprior.geometry.frames import DepthFrame, Pose3D
from deepprior.models.run_config import SceneConfig

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"DPDS"
DATASET_VERSION = 1
HEADER = struct.Struct("<4sIIII4d")
SUBJECT = struct.Struct("<I")
DIGEST_SIZE = 32
MAX_RENDER_ATTEMPTS = 100


@dataclass
class Dataset:
    frames: List[DepthFrame]
    annotations: List[Pose3D]
    subject_ids: List[int]
    intrinsics: CameraIntrinsics
    # per-subject geometry; only known for generated data
    hand_models: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.frames) == len(self.annotations) == len(self.subject_ids)):
            raise ShapeError(
                f"Dataset lengths differ: {len(self.frames)} frames, "
                f"{len(self.annotations)} annotations, {len(self.subject_ids)} subject ids"
            )
        joint_counts = {pose.num_joints for pose in self.annotations}
        if len(joint_counts) > 1:
            raise ShapeError(f"Annotations have differing joint counts: {sorted(joint_counts)}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def num_joints(self) -> int:
        return self.annotations[0].num_joints if self.annotations else 0

    def poses(self) -> np.ndarray:
        """(N, J, 3) array of annotations."""
        return np.stack([pose.joints for pose in self.annotations])

    def subset(self, indices: Iterable[int]) -> "Dataset":
        indices = list(indices)
        subjects = {self.subject_ids[i] for i in indices}
        return Dataset(
            [self.frames[i] for i in indices],
            [self.annotations[i] for i in indices],
            [self.subject_ids[i] for i in indices],
            self.intrinsics,
            {s: m for s, m in self.hand_models.items() if s in subjects},
        )


def subject_model(seed: int, subject: int, spread: float) -> HandModel:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, subject)))
    return HandModel().scaled(float(rng.uniform(1.0 - spread, 1.0 + spread)))


def render_frame(model: HandModel, cfg: SceneConfig, seed: int, index: int) -> Tuple[DepthFrame, Pose3D]:
    """Render frame ``index``; redraws the pose until the hand is fully in view."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, index)))
    for _ in range(MAX_RENDER_ATTEMPTS):
        angles = sample_angles(cfg, rng)
        root = sample_root(cfg, rng)
        try:
            return render_depth(model, angles, root, cfg, rng)
        except OutOfViewError:
            continue
    raise OutOfViewError(f"Frame {index}: no in-view pose after {MAX_RENDER_ATTEMPTS} attempts")


def generate_dataset(
    n_frames: int,
    n_subjects: int = 1,
    cfg: Optional[SceneConfig] = None,
    seed: Optional[int] = None,
    threads: int = DEEPPRIOR_THREADS,
) -> Dataset:
    """
    Render ``n_frames`` frames; frame i belongs to subject i mod n_subjects.

    Every frame draws from its own seed stream, so output does not depend
    on the thread count.
    """
    if n_frames < 1 or n_subjects < 1:
        raise InsufficientDataError(f"Need at least one frame and one subject, got {n_frames}/{n_subjects}")
    cfg = cfg or SceneConfig()
    seed = cfg.seed if seed is None else seed
    models = {s: subject_model(seed, s, cfg.subject_scale_spread) for s in range(n_subjects)}
    subjects = [i % n_subjects for i in range(n_frames)]

    def job(i: int):
        return render_frame(models[subjects[i]], cfg, seed, i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rendered = list(pool.map(job, range(n_frames)))
    else:
        rendered = [job(i) for i in range(n_frames)]

    logger.info(f"Generated {n_frames} frames for {n_subjects} subjects (seed {seed})")
    return Dataset(
        [frame for frame, _ in rendered],
        [pose for _, pose in rendered],
        subjects,
        scene_intrinsics(cfg),
        models,
    )


def split_by_subject(dataset: Dataset, test_subjects: Sequence[int]) -> Tuple[Dataset, Dataset]:
    """Leave-subjects-out split: (frames of other subjects, frames of ``test_subjects``)."""
    held_out = set(int(s) for s in test_subjects)
    train_idx = [i for i, s in enumerate(dataset.subject_ids) if s not in held_out]
    test_idx = [i for i, s in enumerate(dataset.subject_ids) if s in held_out]
    return dataset.subset(train_idx), dataset.subset(test_idx)


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.joints.json")


def encode_dataset(dataset: Dataset) -> bytes:
    if not len(dataset):
        raise InsufficientDataError("Cannot save an empty dataset")
    k = dataset.intrinsics
    height, width = dataset.frames[0].depth.shape
    parts = [HEADER.pack(DATASET_MAGIC, DATASET_VERSION, len(dataset), width, height, k.fx, k.fy, k.cx, k.cy)]
    for frame, subject in zip(dataset.frames, dataset.subject_ids):
        if frame.depth.shape != (height, width):
            raise ShapeError(f"Frame of shape {frame.depth.shape} in a {height}x{width} dataset")
        parts.append(SUBJECT.pack(subject))
        parts.append(np.ascontiguousarray(frame.depth, dtype="<u2").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def joints_checksum(joints: list) -> str:
    """sha256 of the compact JSON form of the per-frame joint lists."""
    return hashlib.sha256(json.dumps(joints, separators=(",", ":")).encode("utf-8")).hexdigest()


def save_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    blob = encode_dataset(dataset)
    path.write_bytes(blob)
    joints = [pose.joints.tolist() for pose in dataset.annotations]
    sidecar = {
        "version": DATASET_VERSION,
        "checksum": hashlib.sha256(blob).hexdigest(),
        "joints": joints,
        "joints_checksum": joints_checksum(joints),
    }
    sidecar_path(path).write_text(json.dumps(sidecar, separators=(",", ":")), encoding="utf-8")
    logger.info(f"Saved {len(dataset)} frames to {path}")
    return path


def decode_dataset(blob: bytes, poses: Sequence) -> Dataset:
    if len(blob) < HEADER.size:
        raise TruncatedFileError(f"Dataset header truncated ({len(blob)} bytes)")
    if blob[:4] != DATASET_MAGIC:
        raise DatasetFormatError("Not a dataset file (bad magic)")
    _, version, count, width, height, fx, fy, cx, cy = HEADER.unpack_from(blob)
    if version != DATASET_VERSION:
        raise VersionMismatchError(f"Dataset format version {version}, this build reads {DATASET_VERSION}")
    frame_bytes = SUBJECT.size + 2 * width * height
    expected = HEADER.size + count * frame_bytes + DIGEST_SIZE
    if len(blob) < expected:
        raise TruncatedFileError(f"Dataset file holds {len(blob)} bytes, header declares {expected}")
    if len(blob) > expected:
        raise DatasetFormatError(f"{len(blob) - expected} trailing bytes after the dataset checksum")
    body = blob[:expected - DIGEST_SIZE]
    if hashlib.sha256(body).digest() != blob[expected - DIGEST_SIZE:expected]:
        raise ChecksumError("Dataset checksum mismatch")
    if len(poses) != count:
        raise TruncatedFileError(f"Annotation sidecar lists {len(poses)} frames, dataset holds {count}")

    k = CameraIntrinsics(fx, fy, cx, cy, width, height)
    frames, subjects = [], []
    offset = HEADER.size
    for _ in range(count):
        (subject,) = SUBJECT.unpack_from(blob, offset)
        depth = np.frombuffer(blob, dtype="<u2", count=width * height, offset=offset + SUBJECT.size)
        frames.append(DepthFrame(depth.reshape(height, width).astype(np.uint16), k))
        subjects.append(int(subject))
        offset += frame_bytes
    return Dataset(frames, [Pose3D(p) for p in poses], subjects, k)


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    try:
        blob = path.read_bytes()
        sidecar = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise DatasetFormatError(f"Missing dataset file: {e.filename}") from e
    except json.JSONDecodeError as e:
        raise TruncatedFileError(f"Annotation sidecar is not valid JSON: {e}") from e

    if sidecar.get("version") != DATASET_VERSION:
        raise VersionMismatchError(f"Annotation sidecar version {sidecar.get('version')}")
    joints = sidecar.get("joints", [])
    if sidecar.get("joints_checksum") != joints_checksum(joints):
        raise ChecksumError("Annotation checksum mismatch")
    dataset = decode_dataset(blob, joints)
    if sidecar.get("checksum") != hashlib.sha256(blob).hexdigest():
        raise ChecksumError("Annotation sidecar belongs to a different dataset file")
    logger.info(f"Loaded {len(dataset)} frames from {path}")
    return dataset
