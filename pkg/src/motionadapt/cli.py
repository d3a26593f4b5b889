"""Command-line interface: synth, train, eval, ablate, params, gradcheck."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .manifest import load_manifest, load_split
from .model import ModelState, TrainConfig
from .synth import SynthConfig, synthesize_dataset
from .training import (
    ablate,
    count_params,
    evaluate_state,
    grad_check,
    save_ablation_csv,
    save_loss_trace,
    train,
)

logger = logging.getLogger(__name__)

_CONFIG_FLAGS = [
    ("seed", int), ("lr0", float), ("momentum", float), ("epochs", int),
    ("max_steps", int), ("batch_size", int), ("frames_per_clip", int),
    ("max_step", int), ("prompt_len", int), ("prompt_init", str),
    ("adapter_mid", int), ("depth", int), ("heads", int),
    ("ffn_expansion", int), ("tau", float), ("eval_mode", str),
    ("vocab_size", int), ("shots", int),
]
_CONFIG_TOGGLES = ["motion_stream", "map_enabled", "mcb_enabled", "mcb_at_eval"]


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file with TrainConfig keys; flags override it")
    for name, typ in _CONFIG_FLAGS:
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    for name in _CONFIG_TOGGLES:
        flag = name.replace("_", "-")
        parser.add_argument(f"--{flag}", dest=name, action="store_true", default=None)
        parser.add_argument(f"--no-{flag}", dest=name, action="store_false", default=None)


def _resolve_config(args: argparse.Namespace) -> TrainConfig:
    values: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            values.update(json.load(fh))
    for name, _ in _CONFIG_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    for name in _CONFIG_TOGGLES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return TrainConfig.from_json(values)


def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        regime=args.regime, n_classes=args.classes,
        train_per_class=args.train_per_class, test_per_class=args.test_per_class,
        frames_per_clip=args.frames, dim=args.dim, seed=args.seed, noise=args.noise,
        ramp=args.ramp,
    )
    manifest = synthesize_dataset(cfg, args.out)
    n_train = len(manifest.splits["train"])
    n_test = len(manifest.splits["test"])
    print(f"wrote {args.out}: {n_train} train / {n_test} test records, "
          f"{len(manifest.classes)} classes, dim {manifest.dim}")
    return 0


def _cmd_train(args) -> int:
    config = _resolve_config(args)
    manifest = load_manifest(Path(args.data) / "manifest.json")
    state, trace = train(manifest, args.data, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state.save(out / "state.npz")
    save_loss_trace(out / "loss_trace.csv", trace)
    final = trace[-1].loss if trace else float("nan")
    print(f"trained {len(trace)} steps; final loss {final:.6f}; "
          f"state -> {out / 'state.npz'}")
    return 0


def _cmd_eval(args) -> int:
    config_override = _resolve_config(args) if (args.config or _any_flag(args)) else None
    state = ModelState.load(args.state)
    config = config_override or state.config
    manifest = load_manifest(Path(args.data) / "manifest.json")
    records = load_split(manifest, args.data, args.split)
    report = evaluate_state(records, state, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save_json(out / f"eval_{args.split}.json")
    report.save_csv(out / f"eval_{args.split}.csv")
    print(f"{args.split}: top1={report.top1:.4f} top5={report.top5:.4f} "
          f"({report.n_videos} videos, {report.n_views} views, mode={report.mode})")
    return 0


def _any_flag(args) -> bool:
    return any(getattr(args, name, None) is not None
               for name, _ in _CONFIG_FLAGS) or any(
        getattr(args, name, None) is not None for name in _CONFIG_TOGGLES)


def _cmd_ablate(args) -> int:
    config = _resolve_config(args)
    manifest = load_manifest(Path(args.data) / "manifest.json")
    results = ablate(manifest, args.data, config)
    save_ablation_csv(args.out, results)
    for name, _, report in results:
        print(f"{name:9s} top1={report.top1:.4f} top5={report.top5:.4f}")
    print(f"ablation table -> {args.out}")
    return 0


def _cmd_params(args) -> int:
    config = _resolve_config(args)
    state = ModelState.initialize(config, args.dim,
                                  [f"action {k:02d}" for k in range(args.classes)])
    counts = count_params(state)
    if args.json:
        print(json.dumps(counts, indent=2, sort_keys=True))
    else:
        for group, entry in counts["groups"].items():
            print(f"{group:8s} {entry['closed_form']:>10,d}")
        print(f"{'total':8s} {counts['trainable_total']:>10,d} trainable")
        print(f"{'frozen':8s} {counts['frozen_total']:>10,d}")
    return 0


def _cmd_gradcheck(args) -> int:
    if args.config is None and not _any_flag(args):
        # small defaults keep finite differences tractable
        config = TrainConfig(frames_per_clip=4, max_step=2, prompt_len=3, heads=4)
    else:
        config = _resolve_config(args)
    report = grad_check(config, tolerance=args.tolerance, dim=args.dim,
                        n_classes=args.classes, seed=config.seed,
                        sample_per_tensor=args.sample_per_tensor)
    for group, entry in report.per_group.items():
        status = "pass" if entry["passed"] else "FAIL"
        print(f"{group:8s} {status}  max_rel_err={entry['max_rel_err']:.3e} "
              f"({entry['checked']} coords, worst at {entry['worst_at']})")
    print(f"gradcheck {'passed' if report.passed else 'FAILED'} "
          f"in {report.seconds:.1f}s (tolerance {report.tolerance:g})")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionadapt",
        description="Train and evaluate the motion-conditioned matching model "
                    "on frame-feature containers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--regime", default="static_separable",
                   choices=["static_separable", "motion_only"])
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--train-per-class", type=int, default=20)
    p.add_argument("--test-per-class", type=int, default=10)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--ramp", type=float, default=1.0)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_config_args(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved state")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--state", required=True, type=Path)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True, type=Path)
    _add_config_args(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("ablate", help="run the toggle ablation matrix")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_config_args(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("params", help="report parameter counts")
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--json", action="store_true")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_params)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--sample-per-tensor", type=int, default=32)
    _add_config_args(p)
    p.set_defaults(fn=_cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
