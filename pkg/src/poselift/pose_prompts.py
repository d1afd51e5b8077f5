"""Per-action pose prompts and the decoder that refines the final pose feature.

One learnable (L, C) prompt slice per action; the slice matching the sample's
label (ground truth while training, predicted at inference) is attended by
the final pose feature in a standard transformer-decoder block. The refined
feature enters through a per-channel residual scale initialized to zero, so
an untrained module leaves the feature untouched.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionError
from .layers import CrossAttention, FeedForward, LayerNorm, Linear
from .tensor import Parameter, Tensor


class PosePromptBank:
    """Learnable prompts, shape (K, L, C)."""

    def __init__(self, num_actions: int, prompts_per_action: int, channels: int,
                 rng: np.random.Generator, name: str = "app"):
        self.num_actions = num_actions
        self.prompts = Parameter(
            f"{name}.prompts",
            rng.normal(scale=0.02, size=(num_actions, prompts_per_action, channels)))

    def parameters(self) -> list[Parameter]:
        return [self.prompts]


def select_prompts(bank: PosePromptBank, labels) -> Tensor:
    """Pick each sample's prompt slice: labels (B,) -> (B, L, C).

    A scalar label yields a single (L, C) slice. Gradients reach only the
    selected slices.
    """
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= bank.num_actions:
        raise ConfigError(
            f"action label out of range [0, {bank.num_actions}): {labels}")
    return bank.prompts.tensor[labels]


class DecoderBlock:
    """Pre-norm transformer decoder block: self-attention over the query
    tokens, cross-attention into the prompts, then feed-forward."""

    def __init__(self, name: str, channels: int, rng: np.random.Generator):
        self.ln1 = LayerNorm(f"{name}.ln1", channels)
        self.self_attn = CrossAttention(f"{name}.self_attn", channels, rng)
        self.ln2 = LayerNorm(f"{name}.ln2", channels)
        self.cross_attn = CrossAttention(f"{name}.cross_attn", channels, rng)
        self.ln3 = LayerNorm(f"{name}.ln3", channels)
        self.ffn = FeedForward(f"{name}.ffn", channels, rng)

    def __call__(self, query: Tensor, memory: Tensor) -> Tensor:
        normed = self.ln1(query)
        query = query + self.self_attn(normed, normed)
        query = query + self.cross_attn(self.ln2(query), memory)
        return query + self.ffn(self.ln3(query))

    def parameters(self) -> list[Parameter]:
        return (self.ln1.parameters() + self.self_attn.parameters()
                + self.ln2.parameters() + self.cross_attn.parameters()
                + self.ln3.parameters() + self.ffn.parameters())


class PosePromptRefiner:
    """zd (B, 1, C) + selected prompts (B, L, C) -> refined (B, 1, C)."""

    def __init__(self, channels: int, rng: np.random.Generator, blocks: int = 1,
                 name: str = "app"):
        self.channels = channels
        self.blocks = [DecoderBlock(f"{name}.decoder{b}", channels, rng)
                       for b in range(1, blocks + 1)]
        self.gamma = Parameter(f"{name}.gamma", np.zeros(channels))

    def __call__(self, zd: Tensor, selected: Tensor) -> Tensor:
        if zd.shape[-1] != self.channels or selected.shape[-1] != self.channels:
            raise DimensionError(
                f"channel mismatch: zd {zd.shape}, prompts {selected.shape}, "
                f"refiner expects C={self.channels}")
        h = zd
        for block in self.blocks:
            h = block(h, selected)
        return zd + self.gamma.tensor * h

    def parameters(self) -> list[Parameter]:
        params = []
        for block in self.blocks:
            params += block.parameters()
        return params + [self.gamma]


class OutputHead:
    """Linear map from the refined feature to the 3D pose (B, J, 3).

    `output_scale` fixes the units of the affine map (weights stay O(1) for
    the optimizer while targets live in dataset units).
    """

    def __init__(self, channels: int, joints: int, rng: np.random.Generator,
                 output_scale: float = 100.0, name: str = "head"):
        self.joints = joints
        self.output_scale = output_scale
        self.out = Linear(f"{name}.out", channels, joints * 3, rng)

    def __call__(self, z_bar_d: Tensor) -> Tensor:
        batch = z_bar_d.shape[0]
        flat = self.out(z_bar_d.reshape(batch, -1)) * self.output_scale
        return flat.reshape(batch, self.joints, 3)

    def parameters(self) -> list[Parameter]:
        return self.out.parameters()
