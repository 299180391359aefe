"""
Command-line entry point.

    python -m deepprior <subcommand> [flags]

Exit codes: 0 success, 1 usage or configuration error, 2 data or format
error, 3 training failure. Summaries go to stdout; per-epoch progress
lines start with ``[epoch]`` and are suppressed by --quiet.
"""

import argparse
import json
import logging
import sys
from functools import partial
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from deepprior.config import DEEPPRIOR_THREADS, LOG_LEVEL
from deepprior.datagen.dataset import generate_dataset, load_dataset, save_dataset
from deepprior.datagen.model_io import load_model
from deepprior.errors import ConfigError, DeepPriorError
from deepprior.evaluation.ablation import ablate, format_table, preset_cells, write_table
from deepprior.evaluation.benchmark import fps_benchmark
from deepprior.evaluation.export import export_report, load_report
from deepprior.localization.refinement import HandTracker, localization_error
from deepprior.localization.segmentation import locate_center_of_mass
from deepprior.models.run_config import RunConfig
from deepprior.neuralnet.trainer import EpochStats
from deepprior.tasks.evaluation_task import (
    LOCALIZATION_MODES,
    localize_dataset,
    list_records,
    predict_dataset,
    record_failure,
    record_report,
    run_evaluation,
)
from deepprior.tasks.refiner_task import run_refiner_training
from deepprior.tasks.training_task import run_fit_prior, run_training

logger = logging.getLogger(__name__)

# Threshold quoted in the evaluate summary
SUMMARY_THRESHOLD_MM = 40.0


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as ConfigError instead of exiting."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    group = common.add_argument_group("global options")
    group.add_argument("--config", help="Run configuration JSON file")
    group.add_argument("--seed", type=int, help="Run seed (overrides the config)")
    group.add_argument("--out", help="Output artifact path")
    group.add_argument("--threads", type=int, default=DEEPPRIOR_THREADS,
                       help=f"Worker cap for rendering and ablation cells (default: {DEEPPRIOR_THREADS})")
    group.add_argument("--log-level", default=LOG_LEVEL, help=f"Logging level (default: {LOG_LEVEL})")
    group.add_argument("--quiet", action="store_true", help="Suppress per-epoch progress lines")
    group.add_argument("--db", metavar="URL", help="Record evaluation results in this database (e.g. sqlite:///runs.db)")
    return common


def _training_flags() -> argparse.ArgumentParser:
    training = _Parser(add_help=False)
    group = training.add_argument_group("training options")
    group.add_argument("--epochs", type=int, help="Training epochs")
    group.add_argument("--batch-size", type=int, help="Minibatch size")
    group.add_argument("--learning-rate", type=float, help="ADAM learning rate")
    group.add_argument("--augment", metavar="FLAGS",
                       help='Enabled augmentations as letters R, T, S (e.g. "RTS"); "none" disables all')
    group.add_argument("--arch", choices=["resnet", "original", "original_more_filters"], help="Pose network preset")
    group.add_argument("--scale", choices=["desk", "full"], help="Network size (desk: 64px input)")
    group.add_argument("--block", choices=["bottleneck", "basic"], help="Residual block kind")
    group.add_argument("--components", type=int, help="Number of prior components")
    group.add_argument("--freeze-prior", action="store_true", default=None, help="Keep the prior layer fixed")
    group.add_argument("--no-robust-prior", action="store_true", default=None,
                       help="Fit the prior on unaugmented poses")
    group.add_argument("--cube-size", type=float, help="Crop cube edge in mm")
    group.add_argument("--dtype", choices=["float32", "float64"], help="Training precision")
    return training


def _localization_flags() -> argparse.ArgumentParser:
    loc = _Parser(add_help=False)
    group = loc.add_argument_group("localization options")
    group.add_argument("--mode", choices=LOCALIZATION_MODES, help="Hand localization mode (default: com)")
    group.add_argument("--refiner", help="Refinement network file (required for --mode refined)")
    group.add_argument("--noise", type=float, help="Localization noise std in mm for --mode perturbed")
    group.add_argument("--iterations", type=int, help="Refinement iterations")
    return loc


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    training = _training_flags()
    localization = _localization_flags()

    parser = _Parser(prog="deepprior", description="Depth-based 3D hand pose estimation with a PCA prior")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("generate-data", parents=[common], help="Render a synthetic dataset")
    p.add_argument("--frames", type=int, default=100, help="Number of frames (default: 100)")
    p.add_argument("--subjects", type=int, default=1, help="Number of hand subjects (default: 1)")
    p.add_argument("--no-noise", action="store_true", help="Disable missing pixels and depth jitter")

    p = sub.add_parser("fit-prior", parents=[common, training], help="Fit the PCA pose prior")
    p.add_argument("--data", required=True, help="Dataset file (required)")

    p = sub.add_parser("train", parents=[common, training], help="Train a pose network")
    p.add_argument("--data", required=True, help="Dataset file (required)")
    p.add_argument("--prior", help="Prior JSON from fit-prior (fitted on the fly otherwise)")

    p = sub.add_parser("train-refiner", parents=[common, training], help="Train the localization refiner")
    p.add_argument("--data", required=True, help="Dataset file (required)")

    p = sub.add_parser("localize", parents=[common, localization], help="Estimate hand locations")
    p.add_argument("--data", required=True, help="Dataset file (required)")

    p = sub.add_parser("predict", parents=[common, localization], help="Predict joint positions")
    p.add_argument("--model", required=True, help="Pose network file")
    p.add_argument("--data", required=True, help="Dataset file (required)")

    p = sub.add_parser("evaluate", parents=[common, localization], help="Score a pose network")
    p.add_argument("--model", required=True, help="Pose network file")
    p.add_argument("--data", required=True, help="Dataset file (required)")
    p.add_argument("--format", choices=["csv", "json"], help="Report format (default: from --out suffix)")

    p = sub.add_parser("ablate", parents=[common, training], help="Run an ablation preset")
    p.add_argument("--preset", dest="table", default="table4",
                   choices=["table4", "table5", "table6"], help="Ablation preset (default: table4)")
    p.add_argument("--data", help="Dataset file (rendered on the fly otherwise)")
    p.add_argument("--frames", type=int, default=600, help="Frames to render without --data (default: 600)")
    p.add_argument("--subjects", type=int, default=5, help="Subjects to render without --data (default: 5)")
    p.add_argument("--seeds", default=None, help="Comma separated seeds (default: the run seed)")

    p = sub.add_parser("benchmark", parents=[common, localization], help="Measure tracking + prediction fps")
    p.add_argument("--model", required=True, help="Pose network file")
    p.add_argument("--data", required=True, help="Dataset file (required)")
    p.add_argument("--warmup", type=int, default=5, help="Untimed frames per run (default: 5)")
    p.add_argument("--runs", type=int, default=5, help="Timed runs (default: 5)")

    p = sub.add_parser("export-curves", parents=[common], help="Convert a report between csv and json")
    p.add_argument("--report", required=True, help="Report file to read")
    p.add_argument("--format", choices=["csv", "json"], help="Output format (default: from --out suffix)")

    p = sub.add_parser("records", parents=[common], help="List stored evaluation records")
    p.add_argument("--limit", type=int, default=20, help="Rows to show (default: 20)")
    return parser


def _parse_flags(flags: str) -> dict:
    flags = "" if flags.lower() == "none" else flags.upper().replace("+", "")
    unknown = set(flags) - set("RTS")
    if unknown:
        raise ConfigError(f"Unknown augmentation flags: {''.join(sorted(unknown))}")
    return {"enable_rotation": "R" in flags, "enable_translation": "T" in flags, "enable_scale": "S" in flags}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file values overridden by the flags that were given."""
    cfg = RunConfig.load(args.config)
    sections = {"augmentation": {}, "architecture": {}, "optimizer": {}, "evaluation": {}, "scene": {}}
    top = {}

    def given(name):
        return getattr(args, name, None)

    if given("seed") is not None:
        top["seed"] = args.seed
        sections["scene"]["seed"] = args.seed
    if given("epochs") is not None:
        if args.command == "train-refiner":
            top["refiner_epochs"] = args.epochs
        elif args.command == "ablate":
            top["refiner_epochs"] = args.epochs
            sections["optimizer"]["epochs"] = args.epochs
        else:
            sections["optimizer"]["epochs"] = args.epochs
    for flag, key in (("batch_size", "batch_size"), ("learning_rate", "learning_rate")):
        if given(flag) is not None:
            sections["optimizer"][key] = getattr(args, flag)
    if given("augment") is not None:
        sections["augmentation"].update(_parse_flags(args.augment))
    for flag, key in (("arch", "preset"), ("scale", "scale"), ("block", "block"),
                      ("components", "pca_components"), ("freeze_prior", "freeze_prior")):
        if given(flag) is not None:
            sections["architecture"][key] = getattr(args, flag)
    if given("no_robust_prior"):
        sections["architecture"]["robust_prior"] = False
    for flag, key in (("mode", "localization"), ("noise", "localization_noise_mm"),
                      ("iterations", "refine_iterations"), ("cube_size", "cube_size_mm")):
        if given(flag) is not None:
            sections["evaluation"][key] = getattr(args, flag)
    if given("dtype") is not None:
        top["dtype"] = args.dtype

    overrides = {name: values for name, values in sections.items() if values}
    overrides.update(top)
    return cfg.with_overrides(**overrides) if overrides else cfg


def _require_out(args) -> Path:
    if not args.out:
        raise ConfigError(f"{args.command} needs --out")
    return Path(args.out)


def _progress(args, total: int):
    if args.quiet:
        return None

    def report(stats: EpochStats):
        print(f"[epoch] {stats.epoch + 1}/{total} loss={stats.loss:.6f} seconds={stats.seconds:.2f}", flush=True)

    return report


def _finish(result: dict) -> int:
    if result["status"] != "success":
        error = result.get("error")
        print(f"Error: {result['message']}", file=sys.stderr)
        return error.exit_code if isinstance(error, DeepPriorError) else 2
    return 0


def _load_refiner(args):
    return load_model(args.refiner, expected_kind="refinenet").net if getattr(args, "refiner", None) else None


def cmd_generate_data(args, cfg: RunConfig) -> int:
    out = _require_out(args)
    scene = cfg.scene
    if args.no_noise:
        scene = scene.model_copy(update={"missing_probability": 0.0, "depth_jitter_mm": 0.0})
    dataset = generate_dataset(args.frames, args.subjects, scene, scene.seed, args.threads)
    save_dataset(dataset, out)
    print(f"Generated {len(dataset)} frames ({args.subjects} subjects, "
          f"{scene.width}x{scene.height}) -> {out}")
    return 0


def cmd_fit_prior(args, cfg: RunConfig) -> int:
    out = _require_out(args)
    result = run_fit_prior(args.data, out, cfg)
    if result["status"] == "success":
        print(f"Prior with {result['components']} components -> {out}")
    return _finish(result)


def cmd_train(args, cfg: RunConfig) -> int:
    out = _require_out(args)
    result = run_training(args.data, out, cfg, _progress(args, cfg.optimizer.epochs), args.prior)
    if result["status"] == "success":
        loss = "-" if result["final_loss"] is None else f"{result['final_loss']:.6f}"
        print(f"Trained {cfg.architecture.preset} ({result['parameters']} parameters) for "
              f"{result['epochs']} epochs on {result['frames']} frames, final loss {loss} -> {out}")
    return _finish(result)


def cmd_train_refiner(args, cfg: RunConfig) -> int:
    out = _require_out(args)
    result = run_refiner_training(args.data, out, cfg, _progress(args, cfg.refiner_epochs))
    if result["status"] == "success":
        print(f"Trained refiner for {result['epochs']} epochs on {result['frames']} frames -> {out}")
    return _finish(result)


def cmd_localize(args, cfg: RunConfig) -> int:
    dataset = load_dataset(args.data)
    locations = localize_dataset(dataset, cfg, refiner=_load_refiner(args))
    error = localization_error(locations, [p.reference for p in dataset.annotations])
    if args.out:
        document = {
            "mode": cfg.evaluation.localization,
            "localization_error_mm": error,
            "locations": [list(loc.point) for loc in locations],
        }
        Path(args.out).write_text(json.dumps(document, sort_keys=True) + "\n", encoding="utf-8")
    print(f"Localized {len(locations)} frames ({cfg.evaluation.localization}): "
          f"mean 3D error {error:.2f}mm")
    return 0


def cmd_predict(args, cfg: RunConfig) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    cube = model.metadata.get("cube_size_mm", cfg.evaluation.cube_size_mm)
    locations = localize_dataset(dataset, cfg, refiner=_load_refiner(args))
    poses = predict_dataset(model.net, dataset, locations, cube)
    if args.out:
        document = {"fingerprint": model.fingerprint, "joints": [pose.joints.tolist() for pose in poses]}
        Path(args.out).write_text(json.dumps(document, sort_keys=True) + "\n", encoding="utf-8")
    print(f"Predicted {len(poses)} poses with {model.net.kind}" + (f" -> {args.out}" if args.out else ""))
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    result = run_evaluation(args.model, args.data, cfg, None, args.refiner, args.db)
    if result["status"] == "success" and args.out:
        export_report(result["report"], args.out, args.format)
    if result["status"] == "success":
        report = result["report"]
        print(f"Average 3D error: {report.average_error_mm:.2f}mm over {report.frame_count} frames")
        print(f"Localization error: {report.localization_error_mm:.2f}mm")
        for variant, curve in report.curves.items():
            idx = int(np.argmin(np.abs(curve.thresholds - SUMMARY_THRESHOLD_MM)))
            print(f"  {variant}: {curve.fractions[idx]:.3f} of frames within {curve.thresholds[idx]:.0f}mm")
    return _finish(result)


def cmd_ablate(args, cfg: RunConfig) -> int:
    if args.data:
        dataset = load_dataset(args.data)
    else:
        dataset = generate_dataset(args.frames, args.subjects, cfg.scene, cfg.scene.seed, args.threads)
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as e:
            raise ConfigError(f"--seeds must be comma separated integers: {e}") from e
    else:
        seeds = [cfg.seed]

    table = ablate(dataset, preset_cells(args.table), cfg, seeds, args.table, args.threads,
                   _progress(args, cfg.optimizer.epochs))
    if args.out:
        write_table(table, args.out)
    if args.db:
        for row in table.rows:
            for report in row.reports:
                record_report(report, args.db)
            for message in row.errors:
                record_failure(row.label, message, cfg.fingerprint(), args.db)
    print(format_table(table))
    return 0 if any(row.reports for row in table.rows) else 3


def cmd_benchmark(args, cfg: RunConfig) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    cube = model.metadata.get("cube_size_mm", cfg.evaluation.cube_size_mm)
    refiner = _load_refiner(args)
    ev = cfg.evaluation
    if refiner is not None:
        localizer = HandTracker(refiner, cube, dataset.intrinsics, ev.segment_extent_mm, ev.refine_iterations)
    else:
        localizer = partial(locate_center_of_mass, k=dataset.intrinsics, extent=ev.segment_extent_mm)
    result = fps_benchmark(model.net, localizer, dataset.frames, args.warmup, args.runs, cube)
    if args.out:
        document = {"mean_fps": result.mean, "std_fps": result.std, "runs": result.runs, "frames": result.frames}
        Path(args.out).write_text(json.dumps(document, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{model.net.kind}: {result.mean:.1f} fps (std {result.std:.1f}) over {args.runs} runs "
          f"of {result.frames} frames")
    return 0


def cmd_export_curves(args, cfg: RunConfig) -> int:
    out = _require_out(args)
    report = load_report(args.report)
    export_report(report, out, args.format)
    print(f"Exported {len(report.curves)} curves -> {out}")
    return 0


def cmd_records(args, cfg: RunConfig) -> int:
    records = list_records(args.db, args.limit)
    for record in records:
        error = "-" if record.average_error_mm is None else f"{record.average_error_mm:.2f}mm"
        print(f"{record.created_at:%Y-%m-%d %H:%M:%S}  {record.status:<7}  {error:>9}  "
              f"{record.frame_count:>5} frames  {record.label} ({record.fingerprint[:12]})")
    print(f"{len(records)} records")
    return 0


COMMANDS = {
    "generate-data": cmd_generate_data,
    "fit-prior": cmd_fit_prior,
    "train": cmd_train,
    "train-refiner": cmd_train_refiner,
    "localize": cmd_localize,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "benchmark": cmd_benchmark,
    "export-curves": cmd_export_curves,
    "records": cmd_records,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    argv: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except DeepPriorError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
