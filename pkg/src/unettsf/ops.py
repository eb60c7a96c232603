"""Differentiable primitives on numpy arrays.

Four ops cover every model in the package: affine map, 1-D average
pooling, concatenation, and MSE loss. Each forward has a hand-written
backward with the exact gradient. All ops treat the last axis as the
series axis and broadcast over any leading batch axes; gradients over
a batch are summed in a fixed order, so batching never changes results.
Compute is float64 throughout.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .rng import SplitMix64


def affine_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """out = weight @ x + bias along the last axis of x.

    x: (..., n_in); weight: (n_out, n_in); bias: (n_out,).
    """
    if weight.ndim != 2 or bias.ndim != 1 or weight.shape[0] != bias.shape[0]:
        raise ShapeError(
            f"affine expects weight (n_out, n_in) and bias (n_out,), "
            f"got {weight.shape} and {bias.shape}"
        )
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(
            f"affine input has {x.shape[-1]} features, weight expects {weight.shape[1]}"
        )
    return x @ weight.T + bias


def affine_backward(grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray):
    """Gradients of the affine map: (grad_x, grad_weight, grad_bias).

    grad_x = W^T g per sample; grad_W and grad_b are summed over all
    leading batch axes (the op is applied once per sample).
    """
    if grad_out.shape[:-1] != x.shape[:-1] or grad_out.shape[-1] != weight.shape[0]:
        raise ShapeError(
            f"affine backward: upstream {grad_out.shape} does not match "
            f"input {x.shape} with weight {weight.shape}"
        )
    grad_x = grad_out @ weight
    if x.ndim == 1:
        grad_w = np.outer(grad_out, x)
        grad_b = grad_out.copy()
    else:
        g2 = grad_out.reshape(-1, grad_out.shape[-1])
        x2 = x.reshape(-1, x.shape[-1])
        grad_w = g2.T @ x2
        grad_b = g2.sum(axis=0)
    return grad_x, grad_w, grad_b


def pooled_length(length: int, kernel: int, stride: int, padding: int = 0) -> int:
    """floor((L + 2*padding - kernel) / stride) + 1."""
    if kernel < 1 or stride < 1 or padding < 0:
        raise ShapeError(
            f"pooling needs kernel >= 1, stride >= 1, padding >= 0, "
            f"got kernel={kernel} stride={stride} padding={padding}"
        )
    if length + 2 * padding < kernel:
        raise ShapeError(
            f"cannot pool length {length} with kernel {kernel} and padding {padding}"
        )
    return (length + 2 * padding - kernel) // stride + 1


def avgpool1d_forward(
    x: np.ndarray, kernel: int, stride: int, padding: int = 0
) -> np.ndarray:
    """Average pooling along the last axis.

    Padding (when nonzero) adds zeros on both ends and the zeros count
    toward the window mean; the stock configuration never pads.
    """
    pooled_length(x.shape[-1], kernel, stride, padding)
    if padding:
        pad = [(0, 0)] * (x.ndim - 1) + [(padding, padding)]
        x = np.pad(x, pad, mode="constant")
    windows = sliding_window_view(x, kernel, axis=-1)
    return windows[..., ::stride, :].mean(axis=-1)


def avgpool1d_backward(
    grad_out: np.ndarray, length: int, kernel: int, stride: int, padding: int = 0
) -> np.ndarray:
    """Scatter each output gradient back as grad/kernel over its window."""
    out_len = pooled_length(length, kernel, stride, padding)
    if grad_out.shape[-1] != out_len:
        raise ShapeError(
            f"avgpool backward: upstream length {grad_out.shape[-1]} but "
            f"pooling {length} gives {out_len}"
        )
    padded = length + 2 * padding
    grad_x = np.zeros(grad_out.shape[:-1] + (padded,))
    share = grad_out / kernel
    for j in range(out_len):
        grad_x[..., j * stride : j * stride + kernel] += share[..., j : j + 1]
    if padding:
        grad_x = grad_x[..., padding : padding + length]
    return grad_x


def concat_forward(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Join two arrays along the last axis."""
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"concat batch shapes differ: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=-1)


def concat_backward(grad_out: np.ndarray, split: int):
    """Split the upstream gradient back into the two operands."""
    if not 0 <= split <= grad_out.shape[-1]:
        raise ShapeError(
            f"concat backward: split {split} outside upstream length {grad_out.shape[-1]}"
        )
    return grad_out[..., :split], grad_out[..., split:]


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over every element; returns (loss, grad_pred).

    loss = (1/n) sum_i (pred_i - target_i)^2, grad = (2/n)(pred - target).
    """
    if pred.shape != target.shape:
        raise ShapeError(f"mse operands differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    n = diff.size
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / n) * diff


def init_affine(n_in: int, n_out: int, rng: SplitMix64 | int):
    """Uniform(-1/sqrt(n_in), +1/sqrt(n_in)) weight and bias.

    Accepts a live SplitMix64 stream (layers of one model draw from a
    single stream in construction order) or a bare seed. Weight entries
    are drawn row-major, then the bias.
    """
    if n_in < 1 or n_out < 1:
        raise ShapeError(f"affine dims must be positive, got n_in={n_in} n_out={n_out}")
    if isinstance(rng, int):
        rng = SplitMix64(rng)
    bound = 1.0 / np.sqrt(n_in)
    weight = rng.uniform(-bound, bound, (n_out, n_in))
    bias = rng.uniform(-bound, bound, (n_out,))
    return weight, bias
