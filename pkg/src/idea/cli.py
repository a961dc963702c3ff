"""Command line interface.

Subcommands:
    idea eval   --config cfg.json [--report out.json]
    idea search --config cfg.json [--grid grid.json] [--sweep] [--out prefix]
    idea train  --config cfg.json [--checkpoint prefix] [--report out.json]
    idea ablate --config cfg.json [--components proj,bias] [--out prefix]
    idea shots  --config cfg.json [--list 1,2,4,8,16] [--out table.csv]

Every command exits 0 on success. Failures print a stage-tagged message
to stderr and exit 1 (2 for bad arguments, from argparse).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import IdeaError, InputError, ValidationError
from .harness import ExperimentConfig, build_context, report_json, run_experiment, write_report
from .hypersearch import (
    GridSpec,
    coordinate_sweep,
    grid_search,
    write_search_outputs,
    write_sweep_outputs,
)
from .trainable import save_checkpoint, train
from .embedstore import atomic_write_text

ABLATION_COMPONENTS = ("proj", "bias")


def _load_config(path: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_file(path)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    report = run_experiment(config)
    text = report_json(report)
    if args.report:
        write_report(report, args.report)
    sys.stdout.write(text)
    return 0


def cmd_search(args) -> int:
    config = _load_config(args.config)
    if args.grid:
        with open(args.grid, "r", encoding="utf-8") as fh:
            grid = GridSpec.from_dict(json.load(fh))
    elif config.search is not None:
        grid = config.search
    else:
        grid = GridSpec()
    ctx = build_context(config, need_cache=True, need_val=True)
    if args.sweep:
        entries = coordinate_sweep(
            ctx.cache, ctx.head, ctx.val_features.data64, ctx.val_labels, grid, base=config.fusion
        )
        if args.out:
            write_sweep_outputs(entries, args.out)
        best = max(entries, key=lambda e: e.accuracy)
        for e in entries:
            print(f"{e.parameter}={e.value:g} alpha={e.config.alpha:g} beta={e.config.beta:g} "
                  f"theta={e.config.theta:g} accuracy={e.accuracy:.4f}")
        print(f"best: {best.parameter}={best.value:g} accuracy={best.accuracy:.4f}")
    else:
        best, table = grid_search(ctx.cache, ctx.head, ctx.val_features.data64, ctx.val_labels, grid)
        if args.out:
            write_search_outputs(table, args.out)
        print(f"evaluated {len(table)} configs")
        print(
            f"best: alpha={best.alpha:g} beta={best.beta:g} theta={best.theta:g} "
            f"accuracy={table[0][1]:.4f}"
        )
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    if config.mode != "tidea":
        raise ValidationError("'idea train' needs a config with mode 'tidea'")
    report = run_experiment(config)
    if args.checkpoint:
        # Re-train outside run_experiment only to recover the state object;
        # same inputs and seeds, so the result is identical.
        ctx = build_context(config, need_cache=True, need_val=True)
        chosen = config.fusion
        if config.search is not None:
            chosen, _ = grid_search(
                ctx.cache, ctx.head, ctx.val_features.data64, ctx.val_labels, config.search
            )
        state, history = train(
            ctx.cache, ctx.head, ctx.cache.images64, ctx.cache.labels,
            ctx.val_features.data64, ctx.val_labels, chosen, config.train,
            enable_proj=config.enable_proj, enable_bias=config.enable_bias,
        )
        accs = [acc for _, acc in history]
        best_epoch = int(accs.index(max(accs))) if accs else -1
        best_acc = max(accs) if accs else 0.0
        save_checkpoint(state, args.checkpoint, chosen, config.train, best_epoch, best_acc)
    if args.report:
        write_report(report, args.report)
    sys.stdout.write(report_json(report))
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args.config)
    if config.mode != "tidea":
        raise ValidationError("'idea ablate' needs a config with mode 'tidea'")
    components = tuple(c.strip() for c in args.components.split(",") if c.strip())
    unknown = [c for c in components if c not in ABLATION_COMPONENTS]
    if unknown:
        raise ValidationError(f"unknown components {unknown}, expected among {ABLATION_COMPONENTS}")
    if not components:
        raise ValidationError("at least one component is required")

    rows = []
    combos = [[]]
    for _ in components:
        combos = [prefix + [flag] for prefix in combos for flag in (False, True)]
    for combo in combos:
        overrides = dict(zip(components, combo))
        variant = replace(
            config,
            enable_proj=overrides.get("proj", config.enable_proj),
            enable_bias=overrides.get("bias", config.enable_bias),
        )
        report = run_experiment(variant)
        rows.append(
            {
                "enable_proj": variant.enable_proj,
                "enable_bias": variant.enable_bias,
                "top1_accuracy": report.top1_accuracy,
            }
        )
    for row in rows:
        print(
            f"proj={'on' if row['enable_proj'] else 'off':3s} "
            f"bias={'on' if row['enable_bias'] else 'off':3s} "
            f"top1={row['top1_accuracy']:.4f}"
        )
    if args.out:
        prefix = Path(args.out)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["enable_proj", "enable_bias", "top1_accuracy"])
        for row in rows:
            writer.writerow([row["enable_proj"], row["enable_bias"], row["top1_accuracy"]])
        atomic_write_text(prefix.parent / f"{prefix.name}.csv", buf.getvalue())
        atomic_write_text(
            prefix.parent / f"{prefix.name}.json", json.dumps(rows, sort_keys=True, indent=2) + "\n"
        )
    return 0


def cmd_shots(args) -> int:
    config = _load_config(args.config)
    shot_counts = [int(s) for s in args.list.split(",") if s.strip()]
    if not shot_counts or any(k < 1 for k in shot_counts):
        raise ValidationError(f"--list must hold positive shot counts, got {args.list!r}")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [config.seed]
    rows = []
    for k in shot_counts:
        accs = []
        for seed in seeds:
            report = run_experiment(replace(config, shots=k, seed=seed))
            accs.append(report.top1_accuracy)
            rows.append({"shots": k, "seed": seed, "top1_accuracy": report.top1_accuracy})
        rows.append({"shots": k, "seed": "mean", "top1_accuracy": sum(accs) / len(accs)})
    for row in rows:
        print(f"shots={row['shots']:<3} seed={row['seed']!s:<5} top1={row['top1_accuracy']:.4f}")
    if args.out:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["shots", "seed", "top1_accuracy"])
        for row in rows:
            writer.writerow([row["shots"], row["seed"], row["top1_accuracy"]])
        atomic_write_text(args.out, buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idea", description="Few-shot classification over precomputed embeddings."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="run one experiment and print its report")
    p_eval.add_argument("--config", required=True, help="experiment config JSON")
    p_eval.add_argument("--report", help="also write the report to this path")
    p_eval.set_defaults(func=cmd_eval)

    p_search = sub.add_parser("search", help="grid-search the fusion knobs on the validation split")
    p_search.add_argument("--config", required=True, help="experiment config JSON")
    p_search.add_argument("--grid", help="grid JSON with alphas/betas/thetas lists")
    p_search.add_argument("--sweep", action="store_true",
                          help="vary one knob at a time around the config's fusion values")
    p_search.add_argument("--out", help="write <out>.csv and <out>.json")
    p_search.set_defaults(func=cmd_search)

    p_train = sub.add_parser("train", help="train the adapter and evaluate on the test split")
    p_train.add_argument("--config", required=True, help="experiment config JSON (mode tidea)")
    p_train.add_argument("--checkpoint", help="write checkpoint files under this prefix")
    p_train.add_argument("--report", help="also write the report to this path")
    p_train.set_defaults(func=cmd_train)

    p_ablate = sub.add_parser("ablate", help="toggle trainable components and compare accuracy")
    p_ablate.add_argument("--config", required=True, help="experiment config JSON (mode tidea)")
    p_ablate.add_argument("--components", default="proj,bias",
                          help="comma-separated subset of proj,bias (default both: 4 runs)")
    p_ablate.add_argument("--out", help="write <out>.csv and <out>.json")
    p_ablate.set_defaults(func=cmd_ablate)

    p_shots = sub.add_parser("shots", help="accuracy as a function of the shot budget")
    p_shots.add_argument("--config", required=True, help="experiment config JSON")
    p_shots.add_argument("--list", default="1,2,4,8,16", help="comma-separated shot counts")
    p_shots.add_argument("--seeds", help="comma-separated sampling seeds (default: config seed)")
    p_shots.add_argument("--out", help="write the table as CSV")
    p_shots.set_defaults(func=cmd_shots)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IdeaError as exc:
        print(f"idea: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
