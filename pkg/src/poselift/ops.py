"""Neural-net operations composed from the autodiff primitives.

Everything here is differentiable end to end; shapes follow the
channel-last convention (..., frames, channels).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, SequenceTooShortError
from .tensor import Tensor, concat, zeros


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis` (max is subtracted as a constant)."""
    shift = np.max(x.data, axis=axis, keepdims=True)
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def l2_norm(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    return (x * x).sum(axis=axis, keepdims=keepdims).sqrt()


def cosine_similarity(a: Tensor, b: Tensor, axis: int = -1, eps: float = 1e-8) -> Tensor:
    """cos(a, b) with an epsilon guard in the denominator."""
    dot = (a * b).sum(axis=axis)
    return dot / (l2_norm(a, axis=axis) * l2_norm(b, axis=axis) + eps)


def mean_squared(x: Tensor) -> Tensor:
    return (x * x).mean()


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q kᵀ / sqrt(C)) v over the last two axes; batch dims broadcast.

    q: (..., nq, C), k: (..., nk, C), v: (..., nk, C) -> (..., nq, C)
    """
    if q.shape[-1] != k.shape[-1] or k.shape[-1] != v.shape[-1]:
        raise DimensionError(
            f"attention channel extents disagree: q {q.shape}, k {k.shape}, v {v.shape}")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(
            f"attention key/value counts disagree: k {k.shape}, v {v.shape}")
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(q.shape[-1]))
    return softmax(scores, axis=-1) @ v


def dilated_conv1d(x: Tensor, kernel: Tensor, dilation: int = 1,
                   bias: Tensor | None = None, padding: str = "valid") -> Tensor:
    """Temporal convolution along axis -2.

    x: (..., F, Cin), kernel: (w, Cin, Cout), bias: (Cout,).
    "valid" yields F' = F - dilation*(w-1); "same" zero-pads to keep F.
    """
    if kernel.ndim != 3:
        raise DimensionError(f"conv kernel must be (w, Cin, Cout), got {kernel.shape}")
    width, c_in, _ = kernel.shape
    if x.shape[-1] != c_in:
        raise DimensionError(
            f"conv input channels {x.shape} do not match kernel {kernel.shape}")
    if padding == "same":
        total = dilation * (width - 1)
        left, right = total // 2, total - total // 2
        pad_shape = list(x.shape)
        if left:
            pad_shape[-2] = left
            x = concat([zeros(tuple(pad_shape)), x], axis=-2)
        if right:
            pad_shape[-2] = right
            x = concat([x, zeros(tuple(pad_shape))], axis=-2)
    elif padding != "valid":
        raise DimensionError(f"unknown conv padding {padding!r}")
    frames = x.shape[-2]
    out_frames = frames - dilation * (width - 1)
    if out_frames < 1:
        raise SequenceTooShortError(
            f"conv needs at least {dilation * (width - 1) + 1} frames, got {frames}")
    index = [slice(None)] * x.ndim
    out = None
    for i in range(width):
        index[-2] = slice(i * dilation, i * dilation + out_frames)
        term = x[tuple(index)] @ kernel[i]
        out = term if out is None else out + term
    if bias is not None:
        out = out + bias
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (var + eps).sqrt() * gain + bias


def batch_norm(x: Tensor, gain: Tensor, bias: Tensor,
               running_mean: np.ndarray, running_var: np.ndarray,
               training: bool, momentum: float = 0.1, eps: float = 1e-5,
               update_stats: bool = True) -> Tensor:
    """Per-channel batch normalization over all leading axes of (..., C).

    Running statistics are plain arrays mutated in place during training
    (update_stats=True) and used verbatim in eval mode.
    """
    if training:
        axes = tuple(range(x.ndim - 1))
        mu = x.mean(axis=axes, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=axes, keepdims=True)
        if update_stats:
            n = x.size // x.shape[-1]
            unbiased = var.data * (n / max(n - 1, 1))
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.data.reshape(-1)
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased.reshape(-1)
        normed = centered / (var + eps).sqrt()
    else:
        normed = (x - running_mean) / np.sqrt(running_var + eps)
    return normed * gain + bias


def dropout(x: Tensor, p: float, rng: np.random.Generator | None,
            training: bool) -> Tensor:
    """Inverted dropout; p=0 or eval mode is an exact identity (no rng draw)."""
    if not training or p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype)
    return x * (keep / (1.0 - p))
