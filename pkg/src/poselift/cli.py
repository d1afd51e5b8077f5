"""Command-line surface: gen-data, train, eval, ablate, gradcheck.

Every subcommand takes --config plus overrides; exit code 0 on success,
nonzero with a one-line machine-parseable error otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import ablate as ablate_mod
from .config import apply_overrides, load_config
from .data import load_dataset, save_dataset
from .errors import ConfigError, PoseLiftError
from .metrics import MetricsReport, write_metrics_csv, write_summary_csv
from .train import (dataset_from_config, evaluate, load_checkpoint,
                    resolve_hard_actions, restore_model, train_model)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="seed override (data seed for "
                        "gen-data, training seed otherwise)")
    parser.add_argument("--frames", type=int, help="sequence length override")
    parser.add_argument("--lambda", dest="loss_weight", type=float,
                        help="action-loss weight override")
    parser.add_argument("--gt-labels-at-eval", action="store_true", default=None,
                        help="select pose prompts with ground-truth labels at eval")
    parser.add_argument("--disable-atp", action="store_true",
                        help="turn the text-prompt module off")
    parser.add_argument("--disable-app", action="store_true",
                        help="turn the pose-prompt module off")
    parser.add_argument("--tap-layer", type=int,
                        help="encoder block feeding the action projector")
    parser.add_argument("--out", help="output directory")


def _build_config(args, seed_target: str = "train.seed"):
    cfg = load_config(args.config)
    overrides = {
        seed_target: args.seed,
        "data.frames": args.frames,
        "train.lambda": args.loss_weight,
        "atp.tap_layer": args.tap_layer,
    }
    if args.gt_labels_at_eval:
        overrides["train.gt_labels_at_eval"] = True
    if args.disable_atp:
        overrides["atp.enabled"] = False
    if args.disable_app:
        overrides["app.enabled"] = False
    return apply_overrides(cfg, overrides)


def _require_out(args) -> Path:
    if not args.out:
        raise ConfigError("--out <dir> is required for this command")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_plot_data(report: MetricsReport, path: Path) -> None:
    # Per-action value pairs for external bar plotting: "<action> <P1>".
    lines = [f"{name} {report.per_action_p1[name]:.6f}"
             for name in report.action_names if name in report.per_action_p1]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_gen_data(args) -> int:
    cfg = _build_config(args, seed_target="data.seed")
    out = _require_out(args)
    dataset = dataset_from_config(cfg)
    save_dataset(dataset, out)
    print(f"wrote {dataset.manifest.train_count} train / "
          f"{dataset.manifest.eval_count} eval samples to {out}")
    return 0


def _load_or_generate(cfg, data_dir: str | None):
    if data_dir:
        dataset = load_dataset(data_dir)
        if dataset.manifest.frames != cfg.data.frames:
            cfg.data.frames = dataset.manifest.frames
        cfg.data.num_actions = dataset.manifest.num_actions
        cfg.data.joints = dataset.manifest.joints
        return dataset
    return dataset_from_config(cfg)


def _cmd_train(args) -> int:
    cfg = _build_config(args)
    out = _require_out(args)
    dataset = _load_or_generate(cfg, args.data)
    result = train_model(cfg, dataset, out_dir=out)
    write_metrics_csv(result.best_report, out / "metrics.csv")
    write_summary_csv(result.best_report, out / "summary.csv")
    if args.plot:
        _write_plot_data(result.best_report, out / "plot.dat")
    print(f"best eval: {result.best_report.summary_line()} -> {out}")
    return 0


def _cmd_eval(args) -> int:
    if not args.checkpoint:
        raise ConfigError("--checkpoint <file> is required for eval")
    out = _require_out(args)
    chk = load_checkpoint(args.checkpoint)
    cfg = chk.cfg
    if args.gt_labels_at_eval:
        cfg.train.gt_labels_at_eval = True
    model, _ = restore_model(chk)
    dataset = _load_or_generate(cfg, args.data)
    hard = resolve_hard_actions(cfg, dataset)
    report = evaluate(model, dataset.eval, dataset.manifest.action_names, hard,
                      embeddings=chk.embeddings,
                      use_gt_labels=cfg.train.gt_labels_at_eval)
    write_metrics_csv(report, out / "metrics.csv")
    write_summary_csv(report, out / "summary.csv")
    if args.plot:
        _write_plot_data(report, out / "plot.dat")
    print(report.summary_line())
    return 0


def _cmd_ablate(args) -> int:
    cfg = _build_config(args)
    out = _require_out(args)
    if args.mode == "components":
        seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0, 1, 2]
        detail, summary = ablate_mod.run_components(cfg, seeds=seeds)
        detail.write(out / "ablation.csv")
        summary.write(out / "ablation_summary.csv")
        print((out / "ablation_summary.csv").read_text(), end="")
    elif args.mode == "seq-length":
        table = ablate_mod.run_seq_length(cfg)
        table.write(out / "seq_length.csv")
        print((out / "seq_length.csv").read_text(), end="")
    elif args.mode == "tap-layer":
        table = ablate_mod.run_tap_layers(cfg)
        table.write(out / "tap_layer.csv")
        print((out / "tap_layer.csv").read_text(), end="")
    else:
        raise ConfigError(f"unknown ablate mode {args.mode!r}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import run_model_check, run_op_suite

    failures = []
    for name, report in run_op_suite(tol=args.tol).items():
        print(f"{name}: {'PASS' if report.passed else 'FAIL'} "
              f"max rel err {report.max_rel_err:.3e}")
        if not report.passed:
            failures.append(name)
    if not args.ops_only:
        report = run_model_check(tol=args.tol)
        print(f"full_model: {'PASS' if report.passed else 'FAIL'} "
              f"max rel err {report.max_rel_err:.3e} (worst {report.worst_param})")
        if not report.passed:
            failures.append("full_model")
    if failures:
        print(f"error:GradCheckFailure:{','.join(failures)}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poselift",
        description="Action-prompted 2D-to-3D pose lifting at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset directory")
    _add_common(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train a model and keep the best checkpoint")
    _add_common(p)
    p.add_argument("--data", help="dataset directory (generated when omitted)")
    p.add_argument("--plot", action="store_true", help="emit per-action plot data")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", help="checkpoint file from train")
    p.add_argument("--data", help="dataset directory (generated when omitted)")
    p.add_argument("--plot", action="store_true", help="emit per-action plot data")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run an ablation table")
    _add_common(p)
    p.add_argument("--mode", default="components",
                   choices=["components", "seq-length", "tap-layer"])
    p.add_argument("--seeds", help="comma-separated training seeds (components mode)")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--ops-only", action="store_true",
                   help="skip the (slower) full-model check")
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PoseLiftError as exc:
        print(f"error:{type(exc).__name__}:{exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
