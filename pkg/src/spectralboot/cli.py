"""Command-line entry point: augment, train, eval, and bench subcommands.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or configuration
errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .augment import save_plan
from .bench import run_bench
from .config import ConfigError, RunConfig, load_config
from .data import DatasetFormatError
from .evaluation import kfold_eval
from .graphs import laplacian_from_graph
from .pipeline import (
    attack_graph,
    load_dataset,
    make_state,
    prepare_items,
    probe_embeddings,
    run_training,
    train_and_probe,
)
from .training import (
    NonFiniteLossError,
    load_checkpoint,
    save_checkpoint,
    student_embeddings,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="key=value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--out", type=Path, default=Path("runs"),
                        help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectralboot",
        description="Spectral-augmentation bootstrapped graph SSL pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="optimize and store augmentation plans")
    _add_common(p_aug)

    p_train = sub.add_parser("train", help="run the bootstrapped training loop")
    _add_common(p_train)
    p_train.add_argument("--plans", type=Path, default=None,
                         help="directory of plan files from `augment` (else inline)")
    p_train.add_argument("--resume", type=Path, default=None,
                         help="checkpoint to continue from")

    p_eval = sub.add_parser("eval", help="probe a trained checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--attack-sweep", action="store_true",
                        help="retrain on poisoned graphs over the sigma grid")

    p_bench = sub.add_parser("bench", help="eigensolver timing and storage accounting")
    _add_common(p_bench)
    return parser


def cmd_augment(cfg: RunConfig, out: Path) -> int:
    bundle = load_dataset(cfg)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    items = prepare_items(bundle, cfg)
    for idx, item in enumerate(items):
        path = out / f"plan_{idx:04d}.txt"
        save_plan(item.plan, path)
        summary.append({
            "plan": path.name,
            "n": item.plan.n,
            "budget": item.plan.budget,
            "trace_max_final": item.plan.trace_max[-1] if item.plan.trace_max else None,
            "trace_min_final": item.plan.trace_min[-1] if item.plan.trace_min else None,
        })
    (out / "augment_summary.json").write_text(
        json.dumps({"plans": summary, "config_hash": cfg.content_hash()},
                   sort_keys=True, indent=2) + "\n", encoding="utf-8")
    for entry in summary:
        print(f"{entry['plan']}: budget={entry['budget']} "
              f"max_loss={entry['trace_max_final']} min_loss={entry['trace_min_final']}")
    return 0


def cmd_train(cfg: RunConfig, out: Path, plans_dir, resume) -> int:
    from .augment import load_plan

    bundle = load_dataset(cfg)
    plans = None
    if plans_dir is not None:
        plan_files = sorted(Path(plans_dir).glob("plan_*.txt"))
        if not plan_files:
            print(f"error: no plan files in {plans_dir}", file=sys.stderr)
            return USAGE_ERROR
        plans = [load_plan(p) for p in plan_files]
    items = prepare_items(bundle, cfg, plans)
    if resume is not None:
        state = load_checkpoint(resume)
    else:
        state = make_state(cfg, bundle.graph.features.shape[1]
                           if cfg.task == "node-classification"
                           else bundle.graphs[0].features.shape[1])
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.jsonl"
    if resume is None and metrics_path.exists():
        metrics_path.unlink()
    try:
        records = run_training(items, state, cfg, metrics_path=metrics_path,
                               checkpoint_dir=out)
    except NonFiniteLossError as exc:
        snap = out / "abort_snapshot.ckpt"
        save_checkpoint(exc.state, snap, config_hash=cfg.content_hash())
        print(f"error: {exc}; state snapshot written to {snap}", file=sys.stderr)
        return RUNTIME_ERROR
    ckpt = out / "checkpoint.ckpt"
    save_checkpoint(state, ckpt, config_hash=cfg.content_hash())
    last = records[-1] if records else {"epoch": state.epoch, "loss": float("nan")}
    print(f"trained to epoch {state.epoch}; final loss {last['loss']:.6f}; "
          f"checkpoint {ckpt}")
    return 0


def cmd_eval(cfg: RunConfig, out: Path, checkpoint: Path, attack_sweep: bool) -> int:
    if not checkpoint.exists():
        print(f"error: checkpoint not found: {checkpoint}", file=sys.stderr)
        return USAGE_ERROR
    state = load_checkpoint(checkpoint)
    bundle = load_dataset(cfg)
    graph = bundle.graph
    lap = laplacian_from_graph(graph)
    emb = student_embeddings(graph, lap, state)
    report = {"config_hash": cfg.content_hash(), "epoch": state.epoch}
    if cfg.kfold >= 2:
        res = kfold_eval(emb, graph.labels, k=cfg.kfold, repeats=cfg.kfold_repeats,
                         l2=cfg.probe_l2, seed=cfg.seed)
    else:
        res = probe_embeddings(emb, graph.labels, cfg)
    report["clean"] = {"mean": res.mean, "std": res.std, "protocol": res.protocol,
                       "values": [float(v) for v in res.values]}
    if attack_sweep:
        sweep = []
        for sigma in cfg.attack_sigmas:
            if sigma == 0.0:
                sweep.append({"sigma": 0.0, "mean": res.mean, "std": res.std})
                continue
            result = train_and_probe(cfg, poison_sigma=float(sigma))
            sweep.append({"sigma": float(sigma), "mean": result.probe.mean,
                          "std": result.probe.std})
        report["attack"] = {"kind": cfg.attack, "rows": sweep}
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    lines = [f"clean: {res.mean:.4f} +- {res.std:.4f} ({res.protocol})"]
    for row in report.get("attack", {}).get("rows", []):
        lines.append(f"{cfg.attack} sigma={row['sigma']}: "
                     f"{row['mean']:.4f} +- {row['std']:.4f}")
    (out / "eval_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0


def cmd_bench(cfg: RunConfig, out: Path) -> int:
    report = run_bench(cfg.bench_sizes, cfg.bench_ks, tol=cfg.bench_tol, seed=cfg.seed,
                       repeats=cfg.bench_repeats)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if not report["eigensolve"]:
        print("empty bench report (no valid sizes)")
        return 0
    for row in report["eigensolve"]:
        print(f"eigensolve n={row['n']} k={row['k']}: {row['seconds']:.4f}s")
    for row in report["ratios_k"]:
        print(f"k-doubling at n={row['n']}: x{row['ratio']:.2f}")
    for row in report["ratios_n"]:
        print(f"n-doubling at k={row['k']}: x{row['ratio']:.2f}")
    for row in report["storage"]:
        print(f"storage n={row['n']}: nnz={row['nnz']} "
              f"triplet_bytes={row['triplet_bytes']} dense_bytes={row['dense_bytes']}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        if args.command == "augment":
            return cmd_augment(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.out, args.plans, args.resume)
        if args.command == "eval":
            return cmd_eval(cfg, args.out, args.checkpoint, args.attack_sweep)
        if args.command == "bench":
            return cmd_bench(cfg, args.out)
        parser.error(f"unknown command {args.command}")
    except (ConfigError, DatasetFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except NonFiniteLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
