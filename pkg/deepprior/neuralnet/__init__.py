from .ops import (
    Tensor, conv2d_forward, conv2d_backward, maxpool2d_forward, maxpool2d_backward,
    fully_connected_forward, fully_connected_backward, relu_forward, relu_backward,
    dropout, dropout_backward,
)
from .layers import LayerSpec, Layer, Residual, build_layer, residual_block_forward, residual_block_backward
from .network import Network
from .architectures import build_posenet, build_refinenet, build_originalnet, build_from_config
from .adam import AdamState, adam_step
from .trainer import train, predict, predict_batch, predict_normalized, mse_loss, EpochStats
from .gradcheck import gradient_check, GradCheckReport

__all__ = [
    "Tensor", "conv2d_forward", "conv2d_backward", "maxpool2d_forward", "maxpool2d_backward",
    "fully_connected_forward", "fully_connected_backward", "relu_forward", "relu_backward",
    "dropout", "dropout_backward",
    "LayerSpec", "Layer", "Residual", "build_layer", "residual_block_forward", "residual_block_backward",
    "Network",
    "build_posenet", "build_refinenet", "build_originalnet", "build_from_config",
    "AdamState", "adam_step",
    "train", "predict", "predict_batch", "predict_normalized", "mse_loss", "EpochStats",
    "gradient_check", "GradCheckReport",
]
