"""
Ablation harness.

A preset is an ordered list of cells; each cell is a set of overrides on
the base run configuration. Every cell is trained and evaluated once per
seed on the same subject split. Cells whose training-relevant settings
coincide share the trained networks, so cells that only differ in the
localization mode are scored against the same pose network.
"""

import csv
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from deepprior.datagen.dataset import Dataset, split_by_subject
from deepprior.errors import ConfigError, DeepPriorError, InsufficientDataError
from deepprior.evaluation.benchmark import fps_benchmark
from deepprior.evaluation.metrics import EvalReport
from deepprior.localization.refinement import HandTracker
from deepprior.localization.segmentation import locate_center_of_mass
from deepprior.models.run_config import RunConfig
from deepprior.tasks import evaluation_task, refiner_task, training_task

logger = logging.getLogger(__name__)

FPS_FRAMES = 30
FPS_WARMUP = 5


@dataclass
class AblationCell:
    label: str
    overrides: dict = field(default_factory=dict)
    measure_fps: bool = False

    def config(self, base: RunConfig, seed: int) -> RunConfig:
        return base.with_overrides(**self.overrides, seed=seed)


def _augment(flags: str, **extra) -> dict:
    return {
        "enable_rotation": "R" in flags,
        "enable_translation": "T" in flags,
        "enable_scale": "S" in flags,
        **extra,
    }


PRESETS: Dict[str, List[AblationCell]] = {
    "table4": [
        AblationCell("none", {"augmentation": _augment(""), "evaluation": {"localization": "perturbed"}}),
        AblationCell("T", {"augmentation": _augment("T"), "evaluation": {"localization": "perturbed"}}),
        AblationCell("R", {"augmentation": _augment("R"), "evaluation": {"localization": "perturbed"}}),
        AblationCell("S", {"augmentation": _augment("S"), "evaluation": {"localization": "perturbed"}}),
        AblationCell("R+T+S", {"augmentation": _augment("RTS"), "evaluation": {"localization": "perturbed"}}),
        AblationCell("R+T+S & no prior aug.", {
            "augmentation": _augment("RTS"),
            "architecture": {"robust_prior": False},
            "evaluation": {"localization": "perturbed"},
        }),
    ],
    "table5": [
        AblationCell("CoM", {"augmentation": _augment("RTS"), "evaluation": {"localization": "com"}}),
        AblationCell("Refined CoM", {"augmentation": _augment("RTS"), "evaluation": {"localization": "refined"}}),
        AblationCell("Ground truth", {"augmentation": _augment("RTS"),
                                      "evaluation": {"localization": "ground_truth"}}),
    ],
    "table6": [
        AblationCell("Original", {"architecture": {"preset": "original"},
                                  "evaluation": {"localization": "refined"}}, measure_fps=True),
        AblationCell("Original with more filters", {"architecture": {"preset": "original_more_filters"},
                                                    "evaluation": {"localization": "refined"}}, measure_fps=True),
        AblationCell("ResNet", {"architecture": {"preset": "resnet"},
                                "evaluation": {"localization": "refined"}}, measure_fps=True),
    ],
}

PRESET_COLUMNS = {
    "table4": ("error",),
    "table5": ("error", "localization"),
    "table6": ("error", "fps"),
    "custom": ("error", "localization", "fps"),
}


@dataclass
class AblationRow:
    label: str
    status: str
    seeds: List[int]
    reports: List[EvalReport] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    fps: List[float] = field(default_factory=list)

    @property
    def mean_error(self) -> Optional[float]:
        return float(np.mean([r.average_error_mm for r in self.reports])) if self.reports else None

    @property
    def std_error(self) -> Optional[float]:
        return float(np.std([r.average_error_mm for r in self.reports])) if self.reports else None

    @property
    def localization_error(self) -> Optional[float]:
        values = [r.localization_error_mm for r in self.reports if r.localization_error_mm is not None]
        return float(np.mean(values)) if values else None

    @property
    def mean_fps(self) -> Optional[float]:
        return float(np.mean(self.fps)) if self.fps else None


@dataclass
class AblationTable:
    preset: str
    rows: List[AblationRow]

    def row(self, label: str) -> AblationRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def preset_cells(name: str) -> List[AblationCell]:
    if name not in PRESETS:
        raise ConfigError(f"Unknown ablation preset '{name}' (expected one of {sorted(PRESETS)})")
    return PRESETS[name]


def default_split(dataset: Dataset) -> Tuple[Dataset, Dataset]:
    """Hold out the last two subjects (one when fewer than three exist)."""
    subjects = sorted(set(dataset.subject_ids))
    if len(subjects) < 2:
        raise InsufficientDataError("Subject split needs at least two subjects")
    held_out = subjects[-2:] if len(subjects) >= 3 else subjects[-1:]
    return split_by_subject(dataset, held_out)


def _training_key(cfg: RunConfig) -> str:
    data = cfg.model_dump()
    evaluation = data.pop("evaluation")
    data["cube_size_mm"] = evaluation["cube_size_mm"]
    data.pop("refiner_epochs")
    return json.dumps(data, sort_keys=True)


def _refiner_key(cfg: RunConfig) -> str:
    arch = cfg.architecture
    return json.dumps({
        "seed": cfg.seed,
        "dtype": cfg.dtype,
        "augmentation": cfg.augmentation.model_dump(),
        "optimizer": cfg.optimizer.model_dump(),
        "refiner_epochs": cfg.refiner_epochs,
        "scale": arch.scale,
        "fc_width": arch.fc_width,
        "dropout_rate": arch.dropout_rate,
        "cube_size_mm": cfg.evaluation.cube_size_mm,
        "segment_extent_mm": cfg.evaluation.segment_extent_mm,
    }, sort_keys=True)


class _SharedResults:
    """Compute-once store keyed by configuration; safe across worker threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._locks: Dict[str, threading.Lock] = {}
        self._values: Dict[str, object] = {}

    def get(self, key: str, factory: Callable[[], object]):
        with self._lock:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._values:
                self._values[key] = factory()
            return self._values[key]


def run_cell(cell: AblationCell, cfg: RunConfig, train_set: Dataset, test_set: Dataset,
             shared: _SharedResults, on_epoch=None) -> dict:
    """Train (or reuse) and evaluate one cell for one seed."""
    try:
        trained = shared.get("pose:" + _training_key(cfg),
                             lambda: training_task.train_posenet(train_set, cfg, on_epoch))
        refiner = None
        if cfg.evaluation.localization == "refined":
            refiner, _ = shared.get("refiner:" + _refiner_key(cfg),
                                    lambda: refiner_task.train_refiner(train_set, cfg, on_epoch))
        report = evaluation_task.evaluate_network(trained.net, test_set, cfg, refiner, label=cell.label)
        fps = None
        if cell.measure_fps:
            localizer = (HandTracker(refiner, cfg.evaluation.cube_size_mm, test_set.intrinsics,
                                     cfg.evaluation.segment_extent_mm, cfg.evaluation.refine_iterations)
                         if refiner is not None
                         else partial(locate_center_of_mass, k=test_set.intrinsics,
                                      extent=cfg.evaluation.segment_extent_mm))
            frames = test_set.frames[:FPS_WARMUP + FPS_FRAMES]
            fps = fps_benchmark(trained.net, localizer, frames, min(FPS_WARMUP, len(frames) - 1),
                                cube_size=cfg.evaluation.cube_size_mm).mean
            report.fps = fps
    except DeepPriorError as e:
        logger.error(f"Ablation cell '{cell.label}' (seed {cfg.seed}) failed: {e}")
        return {"status": "error", "message": str(e), "label": cell.label, "seed": cfg.seed}
    return {"status": "success", "label": cell.label, "seed": cfg.seed, "report": report, "fps": fps}


def ablate(
    dataset: Union[Dataset, Tuple[Dataset, Dataset]],
    cells: Sequence[AblationCell],
    base_cfg: Optional[RunConfig] = None,
    seeds: Sequence[int] = (0,),
    preset: str = "custom",
    threads: int = 1,
    on_epoch=None,
) -> AblationTable:
    """
    Train and evaluate every cell for every seed.

    ``dataset`` is either one dataset (split by subject with
    ``default_split``) or an explicit (train, test) pair. Failing cells are
    recorded with status "error"; the remaining cells still run.
    """
    base_cfg = base_cfg or RunConfig()
    train_set, test_set = dataset if isinstance(dataset, tuple) else default_split(dataset)
    shared = _SharedResults()
    jobs = [(cell, seed) for cell in cells for seed in seeds]

    def job(item):
        cell, seed = item
        return run_cell(cell, cell.config(base_cfg, seed), train_set, test_set, shared, on_epoch)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(item) for item in jobs]

    rows = []
    for cell in cells:
        row = AblationRow(cell.label, "success", list(seeds))
        for result in results:
            if result["label"] != cell.label:
                continue
            if result["status"] == "success":
                row.reports.append(result["report"])
                if result["fps"] is not None:
                    row.fps.append(result["fps"])
            else:
                row.errors.append(f"seed {result['seed']}: {result['message']}")
        if row.errors:
            row.status = "error" if not row.reports else "partial"
        rows.append(row)
    return AblationTable(preset, rows)


def _fmt(value: Optional[float], spec: str = ".2f") -> str:
    return "-" if value is None else format(value, spec)


def format_table(table: AblationTable) -> str:
    columns = PRESET_COLUMNS.get(table.preset, PRESET_COLUMNS["custom"])
    header = ["Configuration"]
    if "error" in columns:
        header += ["Avg. 3D error (mm)", "Std (mm)"]
    if "localization" in columns:
        header.append("Loc. 3D error (mm)")
    if "fps" in columns:
        header.append("fps")
    header.append("Status")

    lines = []
    for row in table.rows:
        cells = [row.label]
        if "error" in columns:
            cells += [_fmt(row.mean_error), _fmt(row.std_error)]
        if "localization" in columns:
            cells.append(_fmt(row.localization_error))
        if "fps" in columns:
            cells.append(_fmt(row.mean_fps, ".1f"))
        cells.append(row.status)
        lines.append(cells)

    widths = [max(len(str(line[i])) for line in [header] + lines) for i in range(len(header))]

    def render(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

    return "\n".join([render(header), render(["-" * w for w in widths])] + [render(c) for c in lines])


TABLE_COLUMNS = ["label", "status", "seeds", "average_error_mm", "std_error_mm", "localization_error_mm", "message"]


def write_table(table: AblationTable, path: Union[str, Path]) -> Path:
    """CSV of the table. Timings are left out so the file is reproducible."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in table.rows:
            writer.writerow([
                row.label,
                row.status,
                ";".join(str(s) for s in row.seeds),
                "" if row.mean_error is None else repr(row.mean_error),
                "" if row.std_error is None else repr(row.std_error),
                "" if row.localization_error is None else repr(row.localization_error),
                " | ".join(row.errors),
            ])
    return path
