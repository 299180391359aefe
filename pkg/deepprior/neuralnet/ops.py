"""
Forward and backward kernels for the layer kinds used by the networks.

Tensors are plain numpy arrays in NCHW layout (N x features for the
fully-connected kernels). Convolutions are cross-correlations evaluated
through sliding-window views and tensordot contractions.
"""

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from deepprior.errors import DomainError, ShapeError

Tensor = np.ndarray


def conv_output_size(size: int, filter_size: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - filter_size) // stride + 1


def _pad(x: Tensor, padding: int, value: float = 0.0) -> Tensor:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)),
                  mode="constant", constant_values=value)


def conv2d_forward(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0):
    """
    Cross-correlate x (N, C, H, W) with filters w (O, C, f, f) plus bias b (O,).

    Returns the output (N, O, H', W') and the cache needed by conv2d_backward.
    """
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"Convolution of input {x.shape} with filters {w.shape}")
    if stride < 1:
        raise DomainError(f"Stride must be >= 1, got {stride}")
    f = w.shape[2]
    xp = _pad(x, padding)
    if xp.shape[2] < f or xp.shape[3] < f:
        raise ShapeError(f"Filter size {f} exceeds padded input {xp.shape[2:]}")
    windows = sliding_window_view(xp, (f, w.shape[3]), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, H', W', O)
    out = out.transpose(0, 3, 1, 2) + b.reshape(1, -1, 1, 1)
    return np.ascontiguousarray(out), (x.shape, xp.shape, windows, w, stride, padding)


def conv2d_backward(dout: Tensor, cache) -> Tuple[Tensor, Tensor, Tensor]:
    """Gradients with respect to input, filters and bias."""
    x_shape, xp_shape, windows, w, stride, padding = cache
    n, _, out_h, out_w = dout.shape
    fh, fw = w.shape[2], w.shape[3]

    dw = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, f, f)
    db = dout.sum(axis=(0, 2, 3))

    dcols = np.tensordot(dout, w, axes=([1], [0]))  # (N, H', W', C, f, f)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for i in range(fh):
        for j in range(fw):
            dxp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if padding:
        dxp = dxp[:, :, padding:padding + x_shape[2], padding:padding + x_shape[3]]
    return np.ascontiguousarray(dxp), dw, db


def maxpool2d_forward(x: Tensor, pool: int):
    """
    Non-overlapping max pooling. Spatial sizes that are not multiples of the
    pool size are padded with -inf at the bottom/right.
    """
    n, c, h, w = x.shape
    out_h, out_w = -(-h // pool), -(-w // pool)
    pad_h, pad_w = out_h * pool - h, out_w * pool - w
    if pad_h or pad_w:
        x = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), constant_values=-np.inf)
    blocks = x.reshape(n, c, out_h, pool, out_w, pool).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, out_h, out_w, pool * pool)
    # argmax picks the first index on ties
    argmax = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    return out, ((n, c, h, w), pool, argmax)


def maxpool2d_backward(dout: Tensor, cache) -> Tensor:
    (n, c, h, w), pool, argmax = cache
    out_h, out_w = argmax.shape[2], argmax.shape[3]
    onehot = np.zeros((n, c, out_h, out_w, pool * pool), dtype=dout.dtype)
    np.put_along_axis(onehot, argmax[..., None], dout[..., None], axis=-1)
    dx = onehot.reshape(n, c, out_h, out_w, pool, pool).transpose(0, 1, 2, 4, 3, 5)
    dx = dx.reshape(n, c, out_h * pool, out_w * pool)
    return np.ascontiguousarray(dx[:, :, :h, :w])


def fully_connected_forward(x: Tensor, w: Tensor, b: Tensor):
    """Affine map y = x w^T + b with w of shape (out, in). Inputs are flattened per sample."""
    flat = x.reshape(x.shape[0], -1)
    if flat.shape[1] != w.shape[1]:
        raise ShapeError(f"Fully-connected input has {flat.shape[1]} features, weights expect {w.shape[1]}")
    return flat @ w.T + b, (x.shape, flat, w)


def fully_connected_backward(dout: Tensor, cache) -> Tuple[Tensor, Tensor, Tensor]:
    x_shape, flat, w = cache
    dx = (dout @ w).reshape(x_shape)
    dw = dout.T @ flat
    db = dout.sum(axis=0)
    return dx, dw, db


def relu_forward(x: Tensor):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout: Tensor, mask: Tensor) -> Tensor:
    return dout * mask


def dropout(x: Tensor, rate: float, train: bool, rng: Optional[np.random.Generator] = None):
    """
    Inverted dropout. Returns the output and the mask that was applied
    (None when the layer acts as the identity).
    """
    if not 0.0 <= rate < 1.0:
        raise DomainError(f"Dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        raise DomainError("Training-mode dropout needs a random generator")
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout: Tensor, mask: Optional[Tensor]) -> Tensor:
    return dout if mask is None else dout * mask
