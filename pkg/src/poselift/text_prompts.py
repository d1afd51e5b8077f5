"""Action-text prompting: learnable prompt assembly, a frozen text encoder,
the action projector, pose-to-text enrichment, and the cosine classifier.

The text encoder is a small randomly initialized transformer whose weights
are frozen at construction; only the final projection trains. Gradients
still flow through the frozen layers back into the prompt vectors. After
training, the per-action embeddings are exported so inference never touches
the encoder again.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .errors import ConfigError, SequenceTooShortError
from .layers import CrossAttention, FeedForward, LayerNorm, Linear
from .tensor import Parameter, Tensor, concat
from .encoder import TcnBlock


class TextPromptBank:
    """Shared learnable context vectors plus one class token per action."""

    def __init__(self, num_actions: int, context_tokens: int, channels: int,
                 rng: np.random.Generator, name: str = "atp"):
        self.num_actions = num_actions
        self.context_tokens = context_tokens
        self.context = Parameter(f"{name}.context",
                                 rng.normal(scale=0.02, size=(context_tokens, channels)))
        self.class_tokens = Parameter(f"{name}.class_tokens",
                                      rng.normal(scale=0.02, size=(num_actions, channels)))

    def parameters(self) -> list[Parameter]:
        return [self.context, self.class_tokens]


def assemble_prompts(bank: TextPromptBank) -> Tensor:
    """Per action: N shared context rows followed by that action's class token.

    -> (K, N+1, C)
    """
    k = bank.num_actions
    n, c = bank.context.shape
    ctx = bank.context.tensor.reshape(1, n, c).broadcast_to((k, n, c))
    cls = bank.class_tokens.tensor.reshape(k, 1, c)
    return concat([ctx, cls], axis=1)


class FrozenTextEncoder:
    """Two pre-norm transformer layers (frozen) plus a trainable projection.

    `forward_calls` counts invocations so the inference path can be audited
    for never touching the encoder.
    """

    def __init__(self, sequence_length: int, channels: int, rng: np.random.Generator,
                 layers: int = 2, name: str = "atp.text_encoder"):
        self.pos = Parameter(f"{name}.pos",
                             rng.normal(scale=0.02, size=(sequence_length, channels)),
                             trainable=False)
        self.layers = []
        for i in range(layers):
            self.layers.append({
                "ln1": LayerNorm(f"{name}.layer{i}.ln1", channels, trainable=False),
                "attn": CrossAttention(f"{name}.layer{i}.attn", channels, rng, trainable=False),
                "ln2": LayerNorm(f"{name}.layer{i}.ln2", channels, trainable=False),
                "ffn": FeedForward(f"{name}.layer{i}.ffn", channels, rng, trainable=False),
            })
        self.ln_final = LayerNorm(f"{name}.ln_final", channels, trainable=False)
        # The one trainable piece: the final text projection.
        self.proj = Parameter(f"{name}.proj",
                              np.eye(channels) + rng.normal(scale=0.02, size=(channels, channels)))
        self.forward_calls = 0

    def forward(self, prompts: Tensor) -> Tensor:
        """(K, S, C) prompt sequences -> (K, C) embeddings at the last position."""
        self.forward_calls += 1
        x = prompts + self.pos.tensor
        for layer in self.layers:
            normed = layer["ln1"](x)
            x = x + layer["attn"](normed, normed)
            x = x + layer["ffn"](layer["ln2"](x))
        x = self.ln_final(x)
        last = x[:, -1, :]                      # class-token position
        return last @ self.proj.tensor

    def parameters(self) -> list[Parameter]:
        params = [self.pos]
        for layer in self.layers:
            params += layer["ln1"].parameters() + layer["attn"].parameters()
            params += layer["ln2"].parameters() + layer["ffn"].parameters()
        return params + self.ln_final.parameters() + [self.proj]


class ActionProjector:
    """Map shallow pose features (B, F', C) to one action feature (B, C).

    mode "tcn": dilation-1 width-3 conv blocks, then temporal mean pooling;
    mode "pool": temporal mean pooling only. "same" padding (default) works
    down to single-frame inputs; "valid" enforces the stack's receptive field.
    """

    def __init__(self, channels: int, rng: np.random.Generator, blocks: int = 2,
                 mode: str = "tcn", padding: str = "same", name: str = "proj"):
        if mode not in ("tcn", "pool"):
            raise ConfigError(f"unknown projector mode {mode!r}")
        if padding not in ("same", "valid"):
            raise ConfigError(f"unknown projector padding {padding!r}")
        self.mode = mode
        self.padding = padding
        self.width = 3
        self.blocks = [] if mode == "pool" else [
            TcnBlock(f"{name}.block{b}", channels, width=self.width, dilation=1,
                     dropout=0.0, rng=rng)
            for b in range(1, blocks + 1)
        ]
        self.out = Linear(f"{name}.out", channels, channels, rng)

    @property
    def receptive_field(self) -> int:
        return 1 + (self.width - 1) * len(self.blocks)

    def __call__(self, z: Tensor, training: bool,
                 rng: np.random.Generator | None = None) -> Tensor:
        frames = z.shape[-2]
        if self.padding == "valid" and frames < self.receptive_field:
            raise SequenceTooShortError(
                f"projector needs at least {self.receptive_field} frames "
                f"in valid mode, got {frames}")
        h = z
        for block in self.blocks:
            h = block(h, training=training, padding=self.padding, rng=rng)
        pooled = h.mean(axis=-2)                # (B, C)
        return self.out(pooled)

    def parameters(self) -> list[Parameter]:
        params = []
        for block in self.blocks:
            params += block.parameters()
        return params + self.out.parameters()


class LabelHead:
    """Plain multi-task classifier: action feature -> K logits."""

    def __init__(self, channels: int, num_actions: int, rng: np.random.Generator,
                 name: str = "labelhead"):
        self.out = Linear(f"{name}.out", channels, num_actions, rng)

    def __call__(self, action_feature: Tensor) -> Tensor:
        return ops.softmax(self.out(action_feature), axis=-1)

    def parameters(self) -> list[Parameter]:
        return self.out.parameters()


def first_order_motion(z0: Tensor) -> Tensor:
    """Neighbor-frame differences along the time axis: (..., F, C) -> (..., F-1, C)."""
    frames = z0.shape[-2]
    if frames < 2:
        raise SequenceTooShortError(f"need at least 2 frames to difference, got {frames}")
    index_hi = [slice(None)] * z0.ndim
    index_lo = [slice(None)] * z0.ndim
    index_hi[-2] = slice(1, frames)
    index_lo[-2] = slice(0, frames - 1)
    return z0[tuple(index_hi)] - z0[tuple(index_lo)]


class PoseToText:
    """Enrich text embeddings with pose velocity via cross attention.

    Keys/values are the shallow features concatenated with their first-order
    motion; the residual is scaled by a scalar initialized to zero, so at
    initialization the output equals the input exactly.
    """

    def __init__(self, channels: int, rng: np.random.Generator, name: str = "p2t"):
        self.attn = CrossAttention(f"{name}.attn", channels, rng)
        self.beta = Parameter(f"{name}.beta", np.zeros(()))

    def __call__(self, t: Tensor, z0: Tensor) -> Tensor:
        """t: (K, C) text embeddings, z0: (B, F, C) -> (B, K, C)."""
        batch = z0.shape[0]
        k, c = t.shape
        z_bar = concat([z0, first_order_motion(z0)], axis=1)   # (B, 2F-1, C)
        queries = t.reshape(1, k, c).broadcast_to((batch, k, c))
        enhanced = self.attn(queries, z_bar)
        return queries + self.beta.tensor * enhanced

    def parameters(self) -> list[Parameter]:
        return self.attn.parameters() + [self.beta]


def classify(t_bar: Tensor, action_feature: Tensor, tau: float) -> Tensor:
    """Softmax over cosine similarities between embeddings and the action feature.

    t_bar: (B, K, C) or (K, C); action_feature: (B, C) or (C,) -> (B, K) or (K,).
    """
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    squeeze = action_feature.ndim == 1
    a = action_feature.reshape(1, -1) if squeeze else action_feature
    t3 = t_bar.reshape(1, *t_bar.shape) if t_bar.ndim == 2 else t_bar
    batch, channels = a.shape
    cos = ops.cosine_similarity(t3, a.reshape(batch, 1, channels), axis=-1)  # (B, K)
    y = ops.softmax(cos * (1.0 / tau), axis=-1)
    return y.reshape(-1) if squeeze else y
