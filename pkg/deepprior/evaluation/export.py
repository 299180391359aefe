"""
Report export and import.

CSV layout: one ``# key=value`` line per summary scalar, then a header
row ``variant,threshold_mm,fraction`` and one row per threshold and
curve. Floats are written with ``repr`` so a re-import is exact.
"""

import csv
import io
import json
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from deepprior.errors import DatasetFormatError
from deepprior.evaluation.metrics import VARIANTS, EvalReport, MetricCurve

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["variant", "threshold_mm", "fraction"]
FORMATS = ("csv", "json")


def _format_for(path: Path, fmt: Optional[str]) -> str:
    fmt = fmt or path.suffix.lstrip(".").lower() or "csv"
    if fmt not in FORMATS:
        raise DatasetFormatError(f"Unknown report format '{fmt}' (expected csv or json)")
    return fmt


def _optional(value) -> str:
    return "" if value is None else repr(float(value))


def report_to_csv(report: EvalReport) -> str:
    buffer = io.StringIO()
    buffer.write(f"# label={report.label}\n")
    buffer.write(f"# fingerprint={report.fingerprint}\n")
    buffer.write(f"# frame_count={int(report.frame_count)}\n")
    buffer.write(f"# average_error_mm={float(report.average_error_mm)!r}\n")
    buffer.write(f"# localization_error_mm={_optional(report.localization_error_mm)}\n")
    buffer.write(f"# fps={_optional(report.fps)}\n")
    buffer.write(f"# per_joint_mm={';'.join(repr(float(e)) for e in report.per_joint_mm)}\n")
    for key in sorted(report.extras):
        buffer.write(f"# extra.{key}={float(report.extras[key])!r}\n")

    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for variant in VARIANTS:
        curve = report.curves.get(variant)
        if curve is None:
            continue
        for threshold, fraction in zip(curve.thresholds, curve.fractions):
            writer.writerow([variant, repr(float(threshold)), repr(float(fraction))])
    return buffer.getvalue()


def report_from_csv(text: str) -> EvalReport:
    summary, rows = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            summary[key] = value
        elif line.strip():
            rows.append(line)
    reader = csv.reader(rows)
    if next(reader, None) != CSV_COLUMNS:
        raise DatasetFormatError(f"Report CSV must start with columns {CSV_COLUMNS}")

    points = {}
    for variant, threshold, fraction in reader:
        points.setdefault(variant, []).append((float(threshold), float(fraction)))
    curves = {}
    for variant, values in points.items():
        array = np.asarray(values, dtype=np.float64)
        curves[variant] = MetricCurve(array[:, 0], array[:, 1], variant)

    def optional(key):
        value = summary.get(key, "")
        return float(value) if value else None

    per_joint = summary.get("per_joint_mm", "")
    try:
        return EvalReport(
            average_error_mm=float(summary["average_error_mm"]),
            per_joint_mm=np.asarray([float(v) for v in per_joint.split(";") if v], dtype=np.float64),
            curves=curves,
            frame_count=int(summary["frame_count"]),
            fingerprint=summary.get("fingerprint", ""),
            label=summary.get("label", ""),
            localization_error_mm=optional("localization_error_mm"),
            fps=optional("fps"),
            extras={k[len("extra."):]: float(v) for k, v in summary.items() if k.startswith("extra.")},
        )
    except (KeyError, ValueError) as e:
        raise DatasetFormatError(f"Malformed report summary: {e}") from e


def export_report(report: EvalReport, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    path = Path(path)
    fmt = _format_for(path, fmt)
    if fmt == "json":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    else:
        text = report_to_csv(report)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(text)
    logger.info(f"Wrote {fmt} report to {path}")
    return path


def load_report(path: Union[str, Path], fmt: Optional[str] = None) -> EvalReport:
    path = Path(path)
    fmt = _format_for(path, fmt)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise DatasetFormatError(f"Missing report file: {path}") from e
    if fmt == "json":
        try:
            return EvalReport.from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError) as e:
            raise DatasetFormatError(f"Malformed report JSON: {e}") from e
    return report_from_csv(text)
