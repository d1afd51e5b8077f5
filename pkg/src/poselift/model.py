"""Full lifting model: encoder + output head, optionally wrapped with the
text-prompt classifier and/or the pose-prompt refiner.

Initialization draws every component from its own fixed seed stream, so two
models built from the same seed share bit-identical encoder/head weights
even when different components are enabled. Combined with the zero-
initialized residual scales, an untrained full model therefore produces
exactly the baseline's 3D outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pose_prompts, text_prompts
from .config import Config
from .data import load_embedding_file
from .encoder import EncoderConfig, TcnEncoder
from .errors import ConfigError, FormatError
from .layers import seeded_rng
from .tensor import Parameter, Tensor, collect_parameters

# Fixed per-component seed streams (independent of which components exist).
_STREAM_ENCODER = 0
_STREAM_HEAD = 1
_STREAM_PROJECTOR = 2
_STREAM_TEXT_BANK = 3
_STREAM_TEXT_ENCODER = 4
_STREAM_P2T = 5
_STREAM_APP = 6
_STREAM_LABEL_HEAD = 7
_STREAM_DROPOUT = 8
STREAM_SHUFFLE = 9


@dataclass
class ForwardResult:
    pred3d: Tensor                 # (B, J, 3)
    class_probs: Tensor | None     # (B, K) distribution, None for the plain baseline


def _load_embeddings_checked(path: str, num_actions: int, channels: int) -> np.ndarray:
    arr, names = load_embedding_file(path)
    if arr.shape != (num_actions, channels):
        raise FormatError(
            f"embedding file shape {arr.shape} does not match (K, C) = "
            f"({num_actions}, {channels})")
    if names and len(names) != num_actions:
        raise FormatError(
            f"embedding manifest names {len(names)} actions, expected {num_actions}")
    return arr


class PoseLifter:
    """2D-sequence to 3D-pose model with optional action prompting."""

    def __init__(self, cfg: Config, seed: int | None = None):
        cfg.validate()
        self.cfg = cfg
        self.seed = cfg.train.seed if seed is None else seed
        k = cfg.data.num_actions
        channels = cfg.encoder.channels
        enc_cfg = EncoderConfig(frames=cfg.data.frames, joints=cfg.data.joints,
                                channels=channels, dropout=cfg.encoder.dropout)
        self.encoder = TcnEncoder(enc_cfg, seeded_rng(self.seed, _STREAM_ENCODER))
        self.head = pose_prompts.OutputHead(channels, cfg.data.joints,
                                            seeded_rng(self.seed, _STREAM_HEAD),
                                            output_scale=cfg.encoder.output_scale)
        self.dropout_rng = seeded_rng(self.seed, _STREAM_DROPOUT)

        self.use_atp = cfg.atp.enabled
        self.use_app = cfg.app.enabled
        self.use_label_aux = cfg.use_label_aux

        self.tap_layer = cfg.atp.tap_layer
        if not 1 <= self.tap_layer <= enc_cfg.blocks:
            raise ConfigError(
                f"tap_layer {self.tap_layer} out of range 1..{enc_cfg.blocks}")

        self.projector = None
        if self.use_atp or self.use_label_aux:
            self.projector = text_prompts.ActionProjector(
                channels, seeded_rng(self.seed, _STREAM_PROJECTOR),
                blocks=cfg.atp.projector_blocks, mode=cfg.atp.projector_mode,
                padding=cfg.atp.projector_padding)

        self.text_bank = None
        self.text_encoder = None
        self.learned_embeddings = None
        self.p2t = None
        if self.use_atp:
            if cfg.atp.text_mode == "encoder":
                self.text_bank = text_prompts.TextPromptBank(
                    k, cfg.atp.context_tokens, channels,
                    seeded_rng(self.seed, _STREAM_TEXT_BANK))
                self.text_encoder = text_prompts.FrozenTextEncoder(
                    cfg.atp.context_tokens + 1, channels,
                    seeded_rng(self.seed, _STREAM_TEXT_ENCODER),
                    layers=cfg.atp.text_layers)
            elif cfg.atp.text_mode == "learnable":
                rng = seeded_rng(self.seed, _STREAM_TEXT_BANK)
                self.learned_embeddings = Parameter(
                    "atp.embeddings", rng.normal(scale=0.02, size=(k, channels)))
            else:  # file
                arr = _load_embeddings_checked(cfg.atp.embeddings_path, k, channels)
                self.learned_embeddings = Parameter("atp.embeddings", arr,
                                                    trainable=False)
            self.p2t = text_prompts.PoseToText(channels, seeded_rng(self.seed, _STREAM_P2T))

        self.label_head = None
        if self.use_label_aux:
            self.label_head = text_prompts.LabelHead(
                channels, k, seeded_rng(self.seed, _STREAM_LABEL_HEAD))

        self.prompt_bank = None
        self.refiner = None
        if self.use_app:
            rng = seeded_rng(self.seed, _STREAM_APP)
            self.prompt_bank = pose_prompts.PosePromptBank(
                k, cfg.app.prompts_per_action, channels, rng)
            self.refiner = pose_prompts.PosePromptRefiner(
                channels, rng, blocks=cfg.app.decoder_blocks)

        self.params = collect_parameters(self._all_parameters())

    def _all_parameters(self) -> list[Parameter]:
        params = self.encoder.parameters() + self.head.parameters()
        if self.projector is not None:
            params += self.projector.parameters()
        if self.text_bank is not None:
            params += self.text_bank.parameters()
        if self.text_encoder is not None:
            params += self.text_encoder.parameters()
        if self.learned_embeddings is not None:
            params += [self.learned_embeddings]
        if self.p2t is not None:
            params += self.p2t.parameters()
        if self.label_head is not None:
            params += self.label_head.parameters()
        if self.prompt_bank is not None:
            params += self.prompt_bank.parameters()
        if self.refiner is not None:
            params += self.refiner.parameters()
        return params

    # -- text embeddings ------------------------------------------------------

    def text_embeddings(self) -> Tensor:
        """Current per-action embeddings (K, C), with gradients attached."""
        if not self.use_atp:
            raise ConfigError("text prompts are disabled in this model")
        if self.text_encoder is not None:
            return self.text_encoder.forward(text_prompts.assemble_prompts(self.text_bank))
        return self.learned_embeddings.tensor

    def export_embeddings(self) -> np.ndarray:
        """Snapshot of the embeddings for checkpointing / inference."""
        return np.array(self.text_embeddings().data, copy=True)

    def text_encoder_calls(self) -> int:
        return 0 if self.text_encoder is None else self.text_encoder.forward_calls

    # -- forward passes ----------------------------------------------------------

    def _classify(self, enc_out, training: bool, embeddings: Tensor | None,
                  rng: np.random.Generator | None) -> Tensor | None:
        """Class distribution (B, K) from whichever classifier this variant has."""
        if not (self.use_atp or self.use_label_aux):
            return None
        z_tap = enc_out.tap(self.tap_layer)
        action_feature = self.projector(z_tap, training=training, rng=rng)
        if self.use_atp:
            if embeddings is None:
                raise ConfigError("text embeddings required for classification")
            t_bar = self.p2t(embeddings, enc_out.z0)          # (B, K, C)
            return text_prompts.classify(t_bar, action_feature, self.cfg.atp.tau)
        return self.label_head(action_feature)

    def forward_train(self, x2d: np.ndarray, labels: np.ndarray) -> ForwardResult:
        """Training pass: prompts are selected with ground-truth labels."""
        x = Tensor(x2d)
        rng = self.dropout_rng
        enc_out = self.encoder.forward(x, training=True, rng=rng)
        embeddings = self.text_embeddings() if self.use_atp else None
        probs = self._classify(enc_out, True, embeddings, rng)
        zd = enc_out.zd
        if self.use_app:
            selected = pose_prompts.select_prompts(self.prompt_bank, labels)
            zd = self.refiner(zd, selected)
        pred = self.head(zd)
        return ForwardResult(pred3d=pred, class_probs=probs)

    def forward_eval(self, x2d: np.ndarray, embeddings: np.ndarray | None = None,
                     gt_labels: np.ndarray | None = None,
                     use_gt_labels: bool = False
                     ) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        """Inference pass; the text encoder is never invoked (pass saved
        embeddings instead).

        Returns (pred3d (B, J, 3), predicted_labels (B,) or None, probs or None).
        """
        x = Tensor(x2d)
        enc_out = self.encoder.forward(x, training=False)
        t = None
        if self.use_atp:
            if embeddings is None:
                raise ConfigError(
                    "inference needs saved text embeddings (text encoder is "
                    "not used at eval time)")
            t = Tensor(np.asarray(embeddings))
        probs = self._classify(enc_out, False, t, None)
        predicted = None if probs is None else np.argmax(probs.data, axis=-1)
        zd = enc_out.zd
        if self.use_app:
            if use_gt_labels:
                if gt_labels is None:
                    raise ConfigError("use_gt_labels requires ground-truth labels")
                chosen = np.asarray(gt_labels)
            elif predicted is not None:
                chosen = predicted
            elif gt_labels is not None:
                chosen = np.asarray(gt_labels)
            else:
                raise ConfigError(
                    "pose prompts need labels: enable a classifier or pass labels")
            selected = pose_prompts.select_prompts(self.prompt_bank, chosen)
            zd = self.refiner(zd, selected)
        pred = self.head(zd)
        probs_np = None if probs is None else np.asarray(probs.data)
        return np.asarray(pred.data), predicted, probs_np
