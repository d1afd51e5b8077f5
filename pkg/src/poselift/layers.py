"""Parameterized building blocks: linear maps, norms, attention, feed-forward.

Each layer owns named Parameters (full dotted paths) and exposes
`parameters()` so the model can assemble a flat, unique registry.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Parameter, Tensor


def seeded_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent deterministic stream for (seed, stream-id...)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream)))


def linear_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Linear:
    def __init__(self, name: str, fan_in: int, fan_out: int,
                 rng: np.random.Generator, bias: bool = True, trainable: bool = True):
        self.weight = Parameter(f"{name}.weight", linear_init(rng, fan_in, fan_out),
                                trainable=trainable)
        bound = 1.0 / np.sqrt(fan_in)
        self.bias = Parameter(f"{name}.bias", rng.uniform(-bound, bound, size=fan_out),
                              trainable=trainable) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight.tensor
        if self.bias is not None:
            out = out + self.bias.tensor
        return out

    def parameters(self) -> list[Parameter]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class LayerNorm:
    def __init__(self, name: str, dim: int, trainable: bool = True):
        self.gain = Parameter(f"{name}.gain", np.ones(dim), trainable=trainable)
        self.bias = Parameter(f"{name}.bias", np.zeros(dim), trainable=trainable)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain.tensor, self.bias.tensor)

    def parameters(self) -> list[Parameter]:
        return [self.gain, self.bias]


class BatchNorm:
    """Per-channel batch norm; running stats ride along as frozen parameters
    so checkpoints capture them."""

    def __init__(self, name: str, dim: int, momentum: float = 0.1):
        self.gain = Parameter(f"{name}.gain", np.ones(dim))
        self.bias = Parameter(f"{name}.bias", np.zeros(dim))
        self.running_mean = Parameter(f"{name}.running_mean", np.zeros(dim), trainable=False)
        self.running_var = Parameter(f"{name}.running_var", np.ones(dim), trainable=False)
        self.momentum = momentum

    def __call__(self, x: Tensor, training: bool, update_stats: bool = True) -> Tensor:
        return ops.batch_norm(x, self.gain.tensor, self.bias.tensor,
                              self.running_mean.data, self.running_var.data,
                              training=training, momentum=self.momentum,
                              update_stats=update_stats)

    def parameters(self) -> list[Parameter]:
        return [self.gain, self.bias, self.running_mean, self.running_var]


class CrossAttention:
    """Single-head attention with query/key/value/output projections."""

    def __init__(self, name: str, dim: int, rng: np.random.Generator,
                 trainable: bool = True):
        self.q = Linear(f"{name}.q", dim, dim, rng, trainable=trainable)
        self.k = Linear(f"{name}.k", dim, dim, rng, trainable=trainable)
        self.v = Linear(f"{name}.v", dim, dim, rng, trainable=trainable)
        self.out = Linear(f"{name}.out", dim, dim, rng, trainable=trainable)

    def __call__(self, queries: Tensor, keys_values: Tensor) -> Tensor:
        attended = ops.scaled_dot_attention(self.q(queries),
                                            self.k(keys_values),
                                            self.v(keys_values))
        return self.out(attended)

    def parameters(self) -> list[Parameter]:
        return (self.q.parameters() + self.k.parameters()
                + self.v.parameters() + self.out.parameters())


class FeedForward:
    """Two-layer MLP with ReLU, hidden width `ratio * dim`."""

    def __init__(self, name: str, dim: int, rng: np.random.Generator,
                 ratio: int = 4, trainable: bool = True):
        self.fc1 = Linear(f"{name}.fc1", dim, ratio * dim, rng, trainable=trainable)
        self.fc2 = Linear(f"{name}.fc2", ratio * dim, dim, rng, trainable=trainable)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).relu())

    def parameters(self) -> list[Parameter]:
        return self.fc1.parameters() + self.fc2.parameters()
