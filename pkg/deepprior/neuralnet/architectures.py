"""
Network presets.

posenet:      residual pose regressor ending in a PCA prior layer
refinenet:    small regressor predicting a normalized 3D localization offset
originalnet:  the earlier shallow prior network (optionally with residual-stage widths)
"""

import logging
from typing import List, Optional

from deepprior.errors import DomainError
from deepprior.models.run_config import ArchitectureConfig
from deepprior.neuralnet.layers import LayerSpec
from deepprior.neuralnet.network import Network

logger = logging.getLogger(__name__)

DEFAULT_NUM_JOINTS = 14
DEFAULT_COMPONENTS = 30
DROPOUT_RATE = 0.3

SCALES = {
    "full": {
        "input": 128,
        "stem": 64,
        "stages": (64, 128, 256, 256),
        "fc": 1024,
        "refine_filters": (32, 32, 32),
        "original_filters": (8, 8, 8),
    },
    "desk": {
        "input": 64,
        "stem": 16,
        "stages": (16, 32, 64, 64),
        "fc": 256,
        "refine_filters": (8, 8, 8),
        "original_filters": (8, 8, 8),
    },
}


def _scale(scale: str) -> dict:
    if scale not in SCALES:
        raise DomainError(f"Unknown network scale '{scale}' (expected one of {sorted(SCALES)})")
    return SCALES[scale]


def _fc_head(width: int, dropout_rate: float) -> List[LayerSpec]:
    return [
        LayerSpec("fullyconnected", neurons=width),
        LayerSpec("relu"),
        LayerSpec("dropout", rate=dropout_rate),
        LayerSpec("fullyconnected", neurons=width),
        LayerSpec("relu"),
        LayerSpec("dropout", rate=dropout_rate),
    ]


def _prior_tail(components: int, num_joints: int, freeze_prior: bool) -> List[LayerSpec]:
    return [
        LayerSpec("fullyconnected", neurons=components),
        LayerSpec("priorlayer", neurons=3 * num_joints, frozen=freeze_prior),
    ]


def build_posenet(
    scale: str = "desk",
    num_joints: int = DEFAULT_NUM_JOINTS,
    components: int = DEFAULT_COMPONENTS,
    block: str = "bottleneck",
    fc_width: Optional[int] = None,
    dropout_rate: float = DROPOUT_RATE,
    freeze_prior: bool = False,
    dtype="float32",
    seed: int = 0,
) -> Network:
    """conv + 2x2 pool, four stride-2 residual stages, two dropout FC layers, FC(k), prior layer."""
    s = _scale(scale)
    specs = [
        LayerSpec("conv", filters=s["stem"], size=5, padding=2),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool=2),
    ]
    for filters in s["stages"]:
        specs.append(LayerSpec("residual", filters=filters, stride=2, block=block))
        specs.append(LayerSpec("relu"))
    specs += _fc_head(fc_width or s["fc"], dropout_rate)
    specs += _prior_tail(components, num_joints, freeze_prior)
    net = Network(specs, (1, s["input"], s["input"]), kind="posenet", dtype=dtype, seed=seed)
    logger.debug(f"Built {scale} posenet with {net.parameter_count()} parameters")
    return net


def build_refinenet(
    scale: str = "desk",
    fc_width: Optional[int] = None,
    dropout_rate: float = DROPOUT_RATE,
    dtype="float32",
    seed: int = 0,
) -> Network:
    """Three conv + pool stages, two dropout FC layers and a 3-output regressor."""
    s = _scale(scale)
    f1, f2, f3 = s["refine_filters"]
    specs = [
        LayerSpec("conv", filters=f1, size=5, padding=2),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool=2),
        LayerSpec("conv", filters=f2, size=5, padding=2),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool=2),
        LayerSpec("conv", filters=f3, size=3, padding=1),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool=2),
    ]
    specs += _fc_head(fc_width or s["fc"], dropout_rate)
    specs.append(LayerSpec("fullyconnected", neurons=3))
    return Network(specs, (1, s["input"], s["input"]), kind="refinenet", dtype=dtype, seed=seed)


def build_originalnet(
    scale: str = "desk",
    more_filters: bool = False,
    num_joints: int = DEFAULT_NUM_JOINTS,
    components: int = DEFAULT_COMPONENTS,
    fc_width: Optional[int] = None,
    dropout_rate: float = DROPOUT_RATE,
    freeze_prior: bool = False,
    dtype="float32",
    seed: int = 0,
) -> Network:
    """
    Shallow prior network: conv5x5 + pool4, conv5x5 + pool2, conv3x3,
    two FC layers, FC(k) and the prior layer.
    """
    s = _scale(scale)
    f1, f2, f3 = s["stages"][:3] if more_filters else s["original_filters"]
    specs = [
        LayerSpec("conv", filters=f1, size=5, padding=2),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool=4),
        LayerSpec("conv", filters=f2, size=5, padding=2),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool=2),
        LayerSpec("conv", filters=f3, size=3, padding=1),
        LayerSpec("relu"),
    ]
    specs += _fc_head(fc_width or s["fc"], dropout_rate)
    specs += _prior_tail(components, num_joints, freeze_prior)
    return Network(specs, (1, s["input"], s["input"]), kind="originalnet", dtype=dtype, seed=seed)


def build_from_config(cfg: ArchitectureConfig, num_joints: int, components: int, dtype, seed: int) -> Network:
    """Pose network for an architecture preset."""
    if cfg.preset == "resnet":
        return build_posenet(cfg.scale, num_joints, components, cfg.block, cfg.fc_width,
                             cfg.dropout_rate, cfg.freeze_prior, dtype, seed)
    return build_originalnet(cfg.scale, cfg.preset == "original_more_filters", num_joints, components,
                             cfg.fc_width, cfg.dropout_rate, cfg.freeze_prior, dtype, seed)
