"""Command line entry point.

Subcommands: ``synth`` (generate a paired dataset), ``train``, ``eval``,
``ablate`` (the six-row component grid), ``sweep`` (alignment-loss weight
sensitivity) and ``diagnose`` (modality gap, similarity consistency and the
gradient-check suite).

Every command writes deterministic report files plus a ``manifest.json``
carrying the non-deterministic run context (timestamp, host, argv), so
reproducibility can be checked by diffing the reports alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datamodel import (
    DatasetError,
    TEXT_QUANT_BINS,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .evaluator import (
    ablation_to_csv,
    embed_corpus,
    evaluate_retrieval,
    modality_gap,
    pairwise_consistency,
    run_ablation,
)
from .gradcheck import run_gradient_suite
from .trainer import (
    ConfigError,
    TrainConfig,
    init_state,
    load_checkpoint,
    sweep,
    train,
)

SWEEP_DEFAULT_WEIGHTS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: Path, args: argparse.Namespace) -> None:
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "package_version": __version__,
    }
    _write_json(out_dir / "manifest.json", manifest)


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(f"override {text!r} is not KEY=VALUE")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _load_config(args: argparse.Namespace) -> TrainConfig:
    data = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    for override in getattr(args, "set", None) or []:
        key, value = _parse_override(override)
        data[key] = value
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return TrainConfig.from_dict(data)


def _load_split(args: argparse.Namespace, config: TrainConfig):
    pairs = load_dataset(args.data)
    n_val = getattr(args, "n_val", 0) or 0
    n_test = getattr(args, "n_test", 0) or 0
    return split_dataset(pairs, n_val, n_test, config.seed), pairs


def _cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = generate_synthetic(args.pairs, args.latent, args.noise, args.seed)
    save_dataset(pairs, out_dir / "dataset.jsonl")
    info = {
        "n_pairs": args.pairs,
        "latent_dim": args.latent,
        "noise": args.noise,
        "seed": args.seed,
        "vocab_size": args.latent * TEXT_QUANT_BINS,
        "atom_dim": args.latent,
    }
    _write_json(out_dir / "dataset_info.json", info)
    _write_manifest(out_dir, args)
    print(f"wrote {len(pairs)} pairs to {out_dir / 'dataset.jsonl'}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args)
    (train_pairs, val_pairs, _), _ = _load_split(args, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "config.json", config.to_dict())
    state, log_path = train(
        train_pairs,
        config,
        val=val_pairs or None,
        out_dir=out_dir,
        resume_from=args.resume,
    )
    _write_manifest(out_dir, args)
    print(f"trained {state.step} steps; log at {log_path}")
    return 0


def _pool_pairs(args: argparse.Namespace, config: TrainConfig):
    (train_pairs, val_pairs, test_pairs), all_pairs = _load_split(args, config)
    if args.pool == "test":
        if not test_pairs:
            raise ConfigError("n_test must be > 0 when --pool test")
        return test_pairs
    return all_pairs


def _cmd_eval(args: argparse.Namespace) -> int:
    state = load_checkpoint(args.checkpoint)
    config = _load_config(args) if args.config else state.config
    pool = _pool_pairs(args, config)
    x_text, x_mol = embed_corpus(state, pool)
    report = evaluate_retrieval(x_text, x_mol, metric=args.metric)
    out_dir = Path(args.out)
    _write_json(out_dir / "retrieval_report.json", report.as_dict())
    _write_manifest(out_dir, args)
    print(json.dumps(report.as_dict()["text_to_molecule"]))
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    (train_pairs, _, test_pairs), _ = _load_split(args, config)
    if not test_pairs:
        raise ConfigError("n_test must be > 0 for ablation evaluation")
    rows = run_ablation(train_pairs, test_pairs, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "ablation.json", rows)
    (out_dir / "ablation.csv").write_text(ablation_to_csv(rows), encoding="utf-8")
    _write_manifest(out_dir, args)
    print(f"wrote {len(rows)} ablation rows to {out_dir / 'ablation.csv'}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args)
    (train_pairs, _, test_pairs), _ = _load_split(args, config)
    if not test_pairs:
        raise ConfigError("n_test must be > 0 for sweep evaluation")
    losses = [args.loss] if args.loss else ["u2u", "u2c"]
    weights = args.weights if args.weights else list(SWEEP_DEFAULT_WEIGHTS)
    rows = []
    for loss_name in losses:
        rows.extend(sweep(train_pairs, test_pairs, config, loss_name, weights))
    out_dir = Path(args.out)
    _write_json(out_dir / "sweep.json", rows)
    _write_manifest(out_dir, args)
    print(f"swept {len(rows)} settings")
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if args.checkpoint:
        state = load_checkpoint(args.checkpoint)
        config = state.config
    else:
        state = init_state(config)
    pool = _pool_pairs(args, config)
    x_text, x_mol = embed_corpus(state, pool)
    gap = modality_gap(x_text, x_mol, include_kde=True)
    consistency = pairwise_consistency(x_text, x_mol, seed=config.seed)
    checks = run_gradient_suite(seed=config.seed)
    out_dir = Path(args.out)
    _write_json(out_dir / "gap_report.json", gap.as_dict())
    _write_json(out_dir / "consistency.json", {"pairwise_consistency": consistency})
    _write_json(out_dir / "gradient_checks.json", checks)
    _write_manifest(out_dir, args)
    failed = [name for name, res in checks.items() if not res["ok"]]
    print(
        f"gap mean {gap.mean:.4f}; consistency {consistency:.4f}; "
        f"gradient checks {'ok' if not failed else 'FAILED: ' + ','.join(failed)}"
    )
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molalign",
        description="Cross-modal text-molecule retrieval: data, training, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("-c", "--config", help="JSON config file with TrainConfig fields")
            p.add_argument(
                "--set",
                action="append",
                metavar="KEY=VALUE",
                help="override any config field (JSON-parsed value); repeatable",
            )
        p.add_argument("-o", "--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="config seed override")

    p = sub.add_parser("synth", help="generate a synthetic paired dataset")
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--latent", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model")
    add_common(p)
    p.add_argument("--data", required=True, help="JSONL dataset path")
    p.add_argument("--n-val", type=int, default=0, dest="n_val")
    p.add_argument("--n-test", type=int, default=0, dest="n_test")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pool", choices=("test", "all"), default="all")
    p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--n-val", type=int, default=0, dest="n_val")
    p.add_argument("--n-test", type=int, default=0, dest="n_test")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run the six-row component ablation grid")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--n-val", type=int, default=0, dest="n_val")
    p.add_argument("--n-test", type=int, required=True, dest="n_test")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("sweep", help="sweep alignment-loss weights")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=("u2u", "u2c"), default=None,
                   help="which loss to reweight (default: both)")
    p.add_argument("--weights", type=float, nargs="*", default=None)
    p.add_argument("--n-val", type=int, default=0, dest="n_val")
    p.add_argument("--n-test", type=int, required=True, dest="n_test")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("diagnose", help="embedding diagnostics and gradient checks")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--pool", choices=("test", "all"), default="all")
    p.add_argument("--n-val", type=int, default=0, dest="n_val")
    p.add_argument("--n-test", type=int, default=0, dest="n_test")
    p.set_defaults(func=_cmd_diagnose)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: missing file {exc.filename}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
