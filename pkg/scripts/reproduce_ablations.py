#!/usr/bin/env python3
"""
Ablation Reproduction Script

Renders a synthetic dataset, runs an ablation preset over several seeds and
prints the seed-averaged table. Optionally writes the table as CSV.

Usage:
    python scripts/reproduce_ablations.py --preset table4 --seeds 0,1,2
    python scripts/reproduce_ablations.py --preset table5 --frames 2500 --epochs 50 --output ./results/
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from deepprior.config import DEEPPRIOR_THREADS
from deepprior.datagen.dataset import generate_dataset
from deepprior.evaluation.ablation import ablate, format_table, preset_cells, write_table
from deepprior.models.run_config import RunConfig


def main():
    parser = argparse.ArgumentParser(
        description="Run an ablation preset over several seeds on synthetic data"
    )
    parser.add_argument(
        "--preset",
        choices=["table4", "table5", "table6"],
        default="table4",
        help="Ablation preset (default: table4)"
    )
    parser.add_argument(
        "--seeds",
        type=str,
        default="0,1,2",
        help="Comma separated seeds (default: 0,1,2)"
    )
    parser.add_argument(
        "--frames",
        type=int,
        default=2500,
        help="Frames to render, split by subject (default: 2500)"
    )
    parser.add_argument(
        "--subjects",
        type=int,
        default=10,
        help="Hand subjects; the last two are held out (default: 10)"
    )
    parser.add_argument(
        "--epochs",
        type=int,
        default=50,
        help="Training epochs per cell (default: 50)"
    )
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="Base run configuration JSON (default: built-in defaults)"
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=DEEPPRIOR_THREADS,
        help=f"Worker threads (default: {DEEPPRIOR_THREADS})"
    )
    parser.add_argument(
        "--output",
        type=str,
        default=None,
        help="Directory for the CSV table (default: print only)"
    )

    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]

    cfg = RunConfig.load(args.config).with_overrides(
        optimizer={"epochs": args.epochs},
        refiner_epochs=args.epochs,
    )

    print(f"Preset: {args.preset}")
    print(f"Seeds: {', '.join(str(s) for s in seeds)}")
    print(f"Rendering {args.frames} frames for {args.subjects} subjects...")
    dataset = generate_dataset(args.frames, args.subjects, cfg.scene, cfg.scene.seed, args.threads)

    print("Training and evaluating cells...\n")
    table = ablate(dataset, preset_cells(args.preset), cfg, seeds, args.preset, args.threads)
    print(format_table(table))

    if args.output:
        output_dir = Path(args.output)
        output_dir.mkdir(parents=True, exist_ok=True)
        path = write_table(table, output_dir / f"{args.preset}.csv")
        print(f"\n  Created: {path}")

    failed = [row.label for row in table.rows if row.status != "success"]
    if failed:
        print(f"\nCells with failures: {', '.join(failed)}")
        sys.exit(3)
    print("\n✓ Ablation completed successfully!")


if __name__ == "__main__":
    main()
