from .run_config import (
    AugmentConfig, ArchitectureConfig, OptimizerConfig, EvaluationConfig,
    SceneConfig, RunConfig,
)
from .run_record import EvalRecord, EvalRecordRead

__all__ = [
    "AugmentConfig", "ArchitectureConfig", "OptimizerConfig", "EvaluationConfig",
    "SceneConfig", "RunConfig",
    "EvalRecord", "EvalRecordRead",
]
