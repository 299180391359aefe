from .metrics import (
    ALL_JOINTS, PER_FRAME_AVERAGE, MetricCurve, EvalReport,
    average_3d_error, per_joint_error, joint_errors, fraction_curve, evaluate_predictions, default_thresholds,
)
from .export import export_report, load_report
from .benchmark import FpsResult, fps_benchmark
from .ablation import (
    PRESETS, AblationCell, AblationRow, AblationTable, ablate, preset_cells, default_split,
    format_table, write_table,
)

__all__ = [
    "ALL_JOINTS", "PER_FRAME_AVERAGE", "MetricCurve", "EvalReport",
    "average_3d_error", "per_joint_error", "joint_errors", "fraction_curve", "evaluate_predictions",
    "default_thresholds",
    "export_report", "load_report",
    "FpsResult", "fps_benchmark",
    "PRESETS", "AblationCell", "AblationRow", "AblationTable", "ablate", "preset_cells", "default_split",
    "format_table", "write_table",
]
