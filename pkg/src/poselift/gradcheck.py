"""Central finite-difference verification of analytic gradients.

Run in float64 (see `tensor.precision`); the 1e-4 tolerance is not
meaningful in float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import TrainingError
from .tensor import Parameter, Tensor


@dataclass
class GradCheckReport:
    eps: float
    tol: float
    max_rel_err: float = 0.0
    worst_param: str = ""
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"gradcheck {verdict}: max rel err {self.max_rel_err:.3e} "
                f"(worst: {self.worst_param or '-'}, tol {self.tol:.1e})")


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # Relative error with a unit floor so near-zero gradients compare absolutely.
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def grad_check(build_loss: Callable[[], Tensor], params: list[Parameter],
               eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare backward() gradients with central differences for every element.

    `build_loss` must rebuild the forward pass from the current parameter
    values and return a scalar Tensor; it is re-evaluated 2 * n_elements
    times, so keep the model small.
    """
    loss = build_loss()
    if not np.isfinite(loss.data).all():
        raise TrainingError(f"gradient check aborted: loss is not finite ({loss.data})")
    for p in params:
        p.zero_grad()
    loss.backward()
    analytic = {}
    for p in params:
        if p.grad is None:
            analytic[p.name] = np.zeros_like(p.data)
        else:
            analytic[p.name] = np.array(p.grad, copy=True)

    report = GradCheckReport(eps=eps, tol=tol)
    for p in params:
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            plus = build_loss().item()
            flat[i] = saved - eps
            minus = build_loss().item()
            flat[i] = saved
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise TrainingError(
                    f"gradient check aborted: non-finite loss while perturbing {p.name!r}")
            num_flat[i] = (plus - minus) / (2.0 * eps)
        err = _rel_err(analytic[p.name], numeric)
        report.per_param[p.name] = err
        if err > report.max_rel_err:
            report.max_rel_err = err
            report.worst_param = p.name
    return report


def run_op_suite(eps: float = 1e-5, tol: float = 1e-4) -> dict[str, GradCheckReport]:
    """Finite-difference check of every differentiable operation (float64)."""
    from . import ops
    from .tensor import concat, precision

    reports: dict[str, GradCheckReport] = {}
    with precision("float64"):
        rng = np.random.default_rng(20240501)

        def check(name: str, build, params):
            reports[name] = grad_check(build, params, eps=eps, tol=tol)

        def weighted(out: Tensor, rng_local=None) -> Tensor:
            r = (rng_local or rng).normal(size=out.shape)
            return (out * r).sum()

        a = Parameter("a", rng.normal(size=(4, 5)))
        b = Parameter("b", rng.normal(size=(5, 3)))
        bat = Parameter("bat", rng.normal(size=(2, 4, 5)))
        w_mm = rng.normal(size=(4, 3))
        w_bat = rng.normal(size=(2, 4, 3))
        check("matmul", lambda: ((a.tensor @ b.tensor) * w_mm).sum(), [a, b])
        check("matmul_batched", lambda: ((bat.tensor @ b.tensor) * w_bat).sum(), [bat, b])

        x = Parameter("x", rng.normal(size=(3, 4)))
        y = Parameter("y", rng.normal(size=(4,)))           # broadcasts over rows
        w34 = rng.normal(size=(3, 4))
        check("add", lambda: ((x.tensor + y.tensor) * w34).sum(), [x, y])
        check("mul", lambda: ((x.tensor * y.tensor) * w34).sum(), [x, y])
        check("sub", lambda: ((x.tensor - y.tensor) * w34).sum(), [x, y])
        check("div", lambda: ((x.tensor / (y.tensor * y.tensor + 1.5)) * w34).sum(), [x, y])
        check("neg", lambda: ((-x.tensor) * w34).sum(), [x])
        check("pow", lambda: (((x.tensor * x.tensor + 0.5) ** 1.5) * w34).sum(), [x])
        check("exp", lambda: (x.tensor.exp() * w34).sum(), [x])
        check("log", lambda: ((x.tensor * x.tensor + 0.5).log() * w34).sum(), [x])
        check("sqrt", lambda: ((x.tensor * x.tensor + 0.5).sqrt() * w34).sum(), [x])
        check("relu", lambda: ((x.tensor + 0.05).relu() * w34).sum(), [x])
        check("reshape", lambda: ((x.tensor.reshape(4, 3)) * w34.reshape(4, 3)).sum(), [x])
        check("transpose", lambda: ((x.tensor.transpose(1, 0)) * w34.T).sum(), [x])
        check("slice", lambda: (x.tensor[1:, ::2] * w34[1:, ::2]).sum(), [x])
        idx = np.array([0, 2, 0])
        check("gather", lambda: (x.tensor[idx] * w34).sum(), [x])
        check("concat", lambda: (concat([x.tensor, x.tensor * 2.0], axis=1)
                                 * np.concatenate([w34, w34], axis=1)).sum(), [x])
        check("broadcast_to", lambda: (y.tensor.reshape(1, 4).broadcast_to((3, 4))
                                       * w34).sum(), [y])
        check("sum", lambda: (x.tensor.sum(axis=0) * w34[0]).sum(), [x])
        check("mean", lambda: (x.tensor.mean(axis=1, keepdims=True)
                               * w34[:, :1]).sum(), [x])
        check("softmax", lambda: (ops.softmax(x.tensor, axis=-1) * w34).sum(), [x])
        check("l2_norm", lambda: (ops.l2_norm(x.tensor, axis=-1) * w34[:, 0]).sum(), [x])
        check("cosine_similarity",
              lambda: (ops.cosine_similarity(x.tensor, Tensor(w34), axis=-1)
                       * w34[:, 1]).sum(), [x])

        gain = Parameter("gain", 1.0 + 0.1 * rng.normal(size=4))
        bias = Parameter("bias", 0.1 * rng.normal(size=4))
        check("layer_norm", lambda: (ops.layer_norm(x.tensor, gain.tensor, bias.tensor)
                                     * w34).sum(), [x, gain, bias])
        rm, rv = np.zeros(4), np.ones(4)
        check("batch_norm", lambda: (ops.batch_norm(
            x.tensor, gain.tensor, bias.tensor, rm, rv, training=True,
            update_stats=False) * w34).sum(), [x, gain, bias])

        def dropout_loss():
            drop_rng = np.random.default_rng(7)   # same mask on every call
            return (ops.dropout(x.tensor, 0.3, drop_rng, training=True) * w34).sum()
        check("dropout", dropout_loss, [x])

        q = Parameter("q", rng.normal(size=(2, 3, 4)))
        kv = Parameter("kv", rng.normal(size=(2, 5, 4)))
        w_attn = rng.normal(size=(2, 3, 4))
        check("scaled_dot_attention",
              lambda: (ops.scaled_dot_attention(q.tensor, kv.tensor, kv.tensor)
                       * w_attn).sum(), [q, kv])

        seq = Parameter("seq", rng.normal(size=(2, 9, 3)))
        kern = Parameter("kern", rng.normal(size=(3, 3, 4)))
        cbias = Parameter("cbias", rng.normal(size=4))
        w_same = rng.normal(size=(2, 9, 4))
        check("conv_valid", lambda: (ops.dilated_conv1d(
            seq.tensor, kern.tensor, dilation=1, bias=cbias.tensor)
            * w_same[:, :7]).sum(), [seq, kern, cbias])
        check("conv_dilated", lambda: (ops.dilated_conv1d(
            seq.tensor, kern.tensor, dilation=3, bias=cbias.tensor)
            * w_same[:, :3]).sum(), [seq, kern, cbias])
        check("conv_same", lambda: (ops.dilated_conv1d(
            seq.tensor, kern.tensor, dilation=1, bias=cbias.tensor, padding="same")
            * w_same).sum(), [seq, kern, cbias])
    return reports


def micro_model_config():
    """Tiny full-model configuration for the end-to-end gradient check."""
    from .config import Config

    cfg = Config()
    cfg.data.num_actions = 2
    cfg.data.frames = 9
    cfg.data.joints = 4
    cfg.encoder.channels = 8
    cfg.atp.context_tokens = 2
    cfg.app.prompts_per_action = 2
    return cfg


def run_model_check(eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Finite-difference check of the combined loss through the whole model
    (float64, 2-sample micro batch)."""
    from .config import Config  # noqa: F401  (micro_model_config builds it)
    from .data import gen_synthetic
    from .losses import action_loss, pose_loss, total_loss
    from .model import PoseLifter
    from .tensor import precision

    cfg = micro_model_config()
    with precision("float64"):
        dataset = gen_synthetic(cfg.data.num_actions, cfg.data.frames,
                                cfg.data.joints, 1, 1, seed=99)
        model = PoseLifter(cfg)
        x2d = dataset.train.input2d
        labels = dataset.train.labels
        target = dataset.train.target3d.astype(np.float64)

        def build_loss() -> Tensor:
            result = model.forward_train(x2d, labels)
            lp = pose_loss(result.pred3d, Tensor(target))
            la = action_loss(result.class_probs, labels)
            return total_loss(lp, la, cfg.train.loss_weight)

        trainable = [p for p in model.params.values() if p.trainable]
        return grad_check(build_loss, trainable, eps=eps, tol=tol)
