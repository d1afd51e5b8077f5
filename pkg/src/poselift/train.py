"""Training loop, evaluation protocol, and versioned checkpoints.

Training selects pose prompts with ground-truth labels; evaluation predicts
labels from the saved text embeddings (the text encoder itself is never
invoked at eval time). The best checkpoint by eval P1 is kept.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config, dump_config, parse_config_text
from .data import PoseDataset, Split, gen_synthetic, read_tensor_blob, write_tensor_blob
from .errors import ConfigError, FormatError, TrainingError
from .layers import seeded_rng
from .losses import action_loss, pose_loss, total_loss
from .metrics import MetricsReport, build_report
from .model import PoseLifter, STREAM_SHUFFLE
from .optim import Adam
from .tensor import Tensor

CHECKPOINT_MAGIC = b"PLCKPT01"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    cfg: Config
    params: dict[str, tuple[bool, np.ndarray]]   # name -> (trainable, values)
    optimizer: dict | None
    embeddings: np.ndarray | None


@dataclass
class TrainResult:
    model: PoseLifter
    best: Checkpoint
    best_report: MetricsReport
    log_lines: list[str] = field(default_factory=list)

    @property
    def train_log(self) -> str:
        return "".join(self.log_lines)


def dataset_from_config(cfg: Config) -> PoseDataset:
    return gen_synthetic(cfg.data.num_actions, cfg.data.frames, cfg.data.joints,
                         cfg.data.train_per_action, cfg.data.eval_per_action,
                         cfg.data.seed)


def resolve_hard_actions(cfg: Config, dataset: PoseDataset) -> list[str]:
    override = [a.strip() for a in cfg.data.hard_actions.split(",") if a.strip()]
    hard = override or dataset.manifest.hard_actions
    unknown = [a for a in hard if a not in dataset.manifest.action_names]
    if unknown:
        raise ConfigError(f"hard actions not in dataset: {unknown}")
    if not hard:
        raise ConfigError("no hard actions configured and dataset names none")
    return hard


def evaluate(model: PoseLifter, split: Split, action_names: list[str],
             hard_actions: list[str], embeddings: np.ndarray | None = None,
             use_gt_labels: bool = False, batch_size: int = 256) -> MetricsReport:
    """Run the inference path over a split and aggregate metrics.

    For text-prompt models, `embeddings` must be the saved per-action
    embeddings; this function never touches the text encoder.
    """
    if model.cfg.data.joints != split.target3d.shape[1]:
        raise ConfigError(
            f"model joints={model.cfg.data.joints} but dataset joints="
            f"{split.target3d.shape[1]}")
    if model.cfg.data.frames != split.input2d.shape[1]:
        raise ConfigError(
            f"model frames={model.cfg.data.frames} but dataset frames="
            f"{split.input2d.shape[1]}")
    preds, predicted_labels = [], []
    have_predictions = True
    for start in range(0, len(split), batch_size):
        stop = min(start + batch_size, len(split))
        pred, plabels, _ = model.forward_eval(
            split.input2d[start:stop], embeddings=embeddings,
            gt_labels=split.labels[start:stop], use_gt_labels=use_gt_labels)
        preds.append(pred)
        if plabels is None:
            have_predictions = False
        else:
            predicted_labels.append(plabels)
    pred = np.concatenate(preds, axis=0)
    plabels = np.concatenate(predicted_labels) if have_predictions and predicted_labels else None
    return build_report(pred, split.target3d.astype(pred.dtype), split.labels,
                        action_names, hard_actions, predicted_labels=plabels)


def snapshot(model: PoseLifter, optimizer: Adam | None,
             embeddings: np.ndarray | None) -> Checkpoint:
    params = {name: (p.trainable, np.array(p.data, copy=True))
              for name, p in model.params.items()}
    opt_state = None
    if optimizer is not None:
        opt_state = {
            "step_count": optimizer.step_count,
            "lr": optimizer.lr,
            "beta1": optimizer.beta1, "beta2": optimizer.beta2,
            "eps": optimizer.eps, "lr_decay": optimizer.lr_decay,
            "m": {k: np.array(v, copy=True) for k, v in optimizer.m.items()},
            "v": {k: np.array(v, copy=True) for k, v in optimizer.v.items()},
        }
    emb = None if embeddings is None else np.array(embeddings, copy=True)
    return Checkpoint(cfg=model.cfg, params=params, optimizer=opt_state, embeddings=emb)


def train_model(cfg: Config, dataset: PoseDataset,
                out_dir: str | Path | None = None,
                epochs: int | None = None) -> TrainResult:
    """Minibatch training on the combined loss; logs one line per epoch and
    keeps the best-eval-P1 checkpoint (including the text embeddings)."""
    cfg.validate()
    if dataset.manifest.num_actions != cfg.data.num_actions:
        raise ConfigError(
            f"config k={cfg.data.num_actions} but dataset has "
            f"{dataset.manifest.num_actions} actions")
    model = PoseLifter(cfg)
    optimizer = Adam(model.params, lr=cfg.train.lr, lr_decay=cfg.train.lr_decay)
    shuffle_rng = seeded_rng(cfg.train.seed, STREAM_SHUFFLE)
    hard = resolve_hard_actions(cfg, dataset)
    names = dataset.manifest.action_names
    n_epochs = cfg.train.epochs if epochs is None else epochs
    weight = cfg.train.loss_weight
    train, evals = dataset.train, dataset.eval

    log_lines = ["epoch,L_P,L_A,eval_P1\n"]
    best: Checkpoint | None = None
    best_report: MetricsReport | None = None
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    classifies = model.use_atp or model.use_label_aux
    for epoch in range(1, n_epochs + 1):
        order = shuffle_rng.permutation(len(train))
        sum_lp, sum_la, seen = 0.0, 0.0, 0
        for start in range(0, len(order), cfg.train.batch_size):
            idx = order[start:start + cfg.train.batch_size]
            result = model.forward_train(train.input2d[idx], train.labels[idx])
            lp = pose_loss(result.pred3d, Tensor(train.target3d[idx]))
            la = action_loss(result.class_probs, train.labels[idx]) if classifies else None
            loss = total_loss(lp, la if la is not None else 0.0, weight)
            if not np.isfinite(loss.data).all():
                if best is not None and out_path is not None:
                    write_checkpoint(out_path / "checkpoint.bin", best)
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} (L_P={lp.item()}, "
                    f"L_A={'-' if la is None else la.item()}); "
                    "last good checkpoint "
                    + ("saved" if best is not None and out_path is not None else "unavailable"))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            sum_lp += lp.item() * len(idx)
            sum_la += (la.item() if la is not None else 0.0) * len(idx)
            seen += len(idx)
        optimizer.decay_lr()

        embeddings = model.export_embeddings() if model.use_atp else None
        report = evaluate(model, evals, names, hard, embeddings=embeddings,
                          use_gt_labels=cfg.train.gt_labels_at_eval)
        log_lines.append(
            f"{epoch},{sum_lp / seen:.6f},{sum_la / seen:.6f},{report.p1:.6f}\n")
        if best_report is None or report.p1 < best_report.p1:
            best = snapshot(model, optimizer, embeddings)
            best_report = report

    result = TrainResult(model=model, best=best, best_report=best_report,
                         log_lines=log_lines)
    if out_path is not None:
        (out_path / "train.log").write_text(result.train_log, encoding="utf-8")
        write_checkpoint(out_path / "checkpoint.bin", best)
    return result


# -- checkpoint container -------------------------------------------------------

def _write_string(buf, text: str) -> None:
    raw = text.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def _read_string(buf, what: str) -> str:
    head = buf.read(4)
    if len(head) < 4:
        raise FormatError(f"truncated checkpoint: missing {what} length")
    (length,) = struct.unpack("<I", head)
    raw = buf.read(length)
    if len(raw) < length:
        raise FormatError(f"truncated checkpoint: short {what}")
    return raw.decode("utf-8")


def write_checkpoint(path: str | Path, chk: Checkpoint) -> None:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    _write_string(buf, dump_config(chk.cfg))
    buf.write(struct.pack("<I", len(chk.params)))
    for name, (trainable, values) in chk.params.items():
        _write_string(buf, name)
        buf.write(struct.pack("<B", 1 if trainable else 0))
        write_tensor_blob(buf, values)
    if chk.optimizer is None:
        buf.write(struct.pack("<B", 0))
    else:
        opt = chk.optimizer
        buf.write(struct.pack("<B", 1))
        buf.write(struct.pack("<Q", opt["step_count"]))
        buf.write(struct.pack("<5d", opt["lr"], opt["beta1"], opt["beta2"],
                              opt["eps"], opt["lr_decay"]))
        buf.write(struct.pack("<I", len(opt["m"])))
        for name in opt["m"]:
            _write_string(buf, name)
            write_tensor_blob(buf, opt["m"][name])
            write_tensor_blob(buf, opt["v"][name])
    if chk.embeddings is None:
        buf.write(struct.pack("<B", 0))
    else:
        buf.write(struct.pack("<B", 1))
        write_tensor_blob(buf, chk.embeddings)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    buf = io.BytesIO(raw)
    magic = buf.read(8)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    cfg_text = _read_string(buf, "config")
    cfg = parse_config_text(cfg_text)
    (count,) = struct.unpack("<I", buf.read(4))
    params: dict[str, tuple[bool, np.ndarray]] = {}
    name = "<header>"
    try:
        for _ in range(count):
            name = _read_string(buf, "parameter name")
            (trainable,) = struct.unpack("<B", buf.read(1))
            values, _ = read_tensor_blob(buf, buf.tell())
            params[name] = (bool(trainable), values)
    except (FormatError, struct.error) as exc:
        raise FormatError(f"corrupt checkpoint while reading parameter {name!r}: {exc}") from None
    (has_opt,) = struct.unpack("<B", buf.read(1))
    optimizer = None
    if has_opt:
        (step_count,) = struct.unpack("<Q", buf.read(8))
        lr, beta1, beta2, eps, lr_decay = struct.unpack("<5d", buf.read(40))
        (n_moments,) = struct.unpack("<I", buf.read(4))
        m, v = {}, {}
        for _ in range(n_moments):
            name = _read_string(buf, "moment name")
            m[name], _ = read_tensor_blob(buf, buf.tell())
            v[name], _ = read_tensor_blob(buf, buf.tell())
        optimizer = {"step_count": step_count, "lr": lr, "beta1": beta1,
                     "beta2": beta2, "eps": eps, "lr_decay": lr_decay,
                     "m": m, "v": v}
    (has_emb,) = struct.unpack("<B", buf.read(1))
    embeddings = None
    if has_emb:
        embeddings, _ = read_tensor_blob(buf, buf.tell())
    return Checkpoint(cfg=cfg, params=params, optimizer=optimizer,
                      embeddings=embeddings)


def restore_model(chk: Checkpoint, cfg: Config | None = None
                  ) -> tuple[PoseLifter, Adam]:
    """Rebuild a model (and optimizer) from a checkpoint.

    Passing `cfg` overrides the stored config; shape mismatches are reported
    with the first offending parameter.
    """
    cfg = chk.cfg if cfg is None else cfg
    model = PoseLifter(cfg)
    for name, param in model.params.items():
        if name not in chk.params:
            raise FormatError(f"checkpoint is missing parameter {name!r}")
        trainable, values = chk.params[name]
        if values.shape != param.shape:
            raise FormatError(
                f"parameter {name!r}: checkpoint shape {values.shape} does not "
                f"match model shape {param.shape}")
        param.data = values
    extra = set(chk.params) - set(model.params)
    if extra:
        raise FormatError(f"checkpoint has unknown parameters: {sorted(extra)[:3]}")
    optimizer = Adam(model.params, lr=cfg.train.lr, lr_decay=cfg.train.lr_decay)
    if chk.optimizer is not None:
        opt = chk.optimizer
        optimizer.step_count = opt["step_count"]
        optimizer.lr = opt["lr"]
        optimizer.beta1, optimizer.beta2 = opt["beta1"], opt["beta2"]
        optimizer.eps, optimizer.lr_decay = opt["eps"], opt["lr_decay"]
        for name in optimizer.m:
            if name in opt["m"]:
                optimizer.m[name] = opt["m"][name].copy()
                optimizer.v[name] = opt["v"][name].copy()
    return model, optimizer
