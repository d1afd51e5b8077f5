"""Run configuration: `key = value` files with [data] [encoder] [atp] [app]
[train] sections. Every key has a default; CLI flags override file values.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class DataSection:
    num_actions: int = 4          # k: number of action classes
    frames: int = 27              # sequence length (9 | 27 | 81 | 243)
    joints: int = 8
    train_per_action: int = 50
    eval_per_action: int = 20
    seed: int = 1234              # generation seed (independent of training seed)
    hard_actions: str = ""        # comma-separated override of the hard-action set


@dataclass
class EncoderSection:
    channels: int = 16
    dropout: float = 0.0
    output_scale: float = 100.0   # dataset units per unit of head output


@dataclass
class AtpSection:
    enabled: bool = True
    context_tokens: int = 16      # shared learnable context vectors per prompt
    tau: float = 0.07             # classification temperature
    text_layers: int = 2          # frozen transformer depth
    text_mode: str = "encoder"    # encoder | learnable | file
    embeddings_path: str = ""     # for text_mode = file
    projector_blocks: int = 2
    projector_mode: str = "tcn"   # tcn | pool
    projector_padding: str = "same"  # same | valid
    tap_layer: int = 1            # encoder block feeding the action projector


@dataclass
class AppSection:
    enabled: bool = True
    prompts_per_action: int = 8   # L
    decoder_blocks: int = 1       # D


@dataclass
class TrainSection:
    epochs: int = 60
    batch_size: int = 16
    lr: float = 1e-3
    lr_decay: float = 0.98        # per-epoch exponential decay
    loss_weight: float = 0.1      # lambda: weight of the action loss
    seed: int = 0                 # init/shuffle seed
    label_aux: str = "auto"       # auto | on | off: plain projector+CE classifier
    gt_labels_at_eval: bool = False


@dataclass
class Config:
    data: DataSection = field(default_factory=DataSection)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    atp: AtpSection = field(default_factory=AtpSection)
    app: AppSection = field(default_factory=AppSection)
    train: TrainSection = field(default_factory=TrainSection)

    def validate(self) -> "Config":
        if self.train.loss_weight < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.train.loss_weight}")
        if self.atp.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.atp.tau}")
        if self.train.epochs < 1 or self.train.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.atp.text_mode not in ("encoder", "learnable", "file"):
            raise ConfigError(f"unknown text_mode {self.atp.text_mode!r}")
        if self.atp.text_mode == "file" and not self.atp.embeddings_path:
            raise ConfigError("text_mode = file requires embeddings_path")
        if self.train.label_aux not in ("auto", "on", "off"):
            raise ConfigError(f"unknown label_aux {self.train.label_aux!r}")
        return self

    @property
    def use_label_aux(self) -> bool:
        if self.train.label_aux == "on":
            return True
        if self.train.label_aux == "off":
            return False
        # auto: a plain classifier is needed whenever prompts are refined by
        # predicted labels but no text-prompt classifier exists.
        return self.app.enabled and not self.atp.enabled


_SECTIONS = {"data": "data", "encoder": "encoder", "atp": "atp",
             "app": "app", "train": "train"}
# "lambda" is the file/CLI spelling of TrainSection.loss_weight.
_KEY_ALIASES = {("train", "lambda"): "loss_weight", ("data", "k"): "num_actions"}


def _coerce(raw: str, target_type: type):
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError:
        raise ConfigError(f"expected {target_type.__name__}, got {raw!r}") from None


def load_config(path: str | Path | None = None) -> Config:
    """Defaults, overlaid with the file at `path` when given."""
    if path is None:
        return Config().validate()
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def parse_config_text(text: str) -> Config:
    """Defaults overlaid with `key = value` lines from `text`."""
    cfg = Config()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for section_name in parser.sections():
        if section_name not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section_name}]")
        section = getattr(cfg, _SECTIONS[section_name])
        types = {f.name: type(getattr(section, f.name)) for f in fields(section)}
        for key, raw in parser.items(section_name):
            attr = _KEY_ALIASES.get((section_name, key), key)
            if attr not in types:
                raise ConfigError(f"unknown key {key!r} in section [{section_name}]")
            setattr(section, attr, _coerce(raw, types[attr]))
    return cfg.validate()


def apply_overrides(cfg: Config, overrides: dict[str, object]) -> Config:
    """Apply CLI-style dotted overrides, e.g. {"train.lambda": 0.2}."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        section_name, _, key = dotted.partition(".")
        if section_name not in _SECTIONS:
            raise ConfigError(f"unknown config section {section_name!r}")
        section = getattr(cfg, _SECTIONS[section_name])
        attr = _KEY_ALIASES.get((section_name, key), key)
        if not hasattr(section, attr):
            raise ConfigError(f"unknown key {key!r} in section [{section_name}]")
        current = getattr(section, attr)
        if isinstance(value, str) and not isinstance(current, str):
            value = _coerce(value, type(current))
        setattr(section, attr, value)
    return cfg.validate()


def dump_config(cfg: Config) -> str:
    """Render back to `key = value` text (lambda keeps its file spelling)."""
    reverse_alias = {(s, attr): key for (s, key), attr in _KEY_ALIASES.items()}
    out = io.StringIO()
    for section_name in _SECTIONS:
        section = getattr(cfg, section_name)
        out.write(f"[{section_name}]\n")
        for f in fields(section):
            key = reverse_alias.get((section_name, f.name), f.name)
            value = getattr(section, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            out.write(f"{key} = {value}\n")
        out.write("\n")
    return out.getvalue()
