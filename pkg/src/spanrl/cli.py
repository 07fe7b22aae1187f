"""Command-line entry points: train, sweep, report, dataset, evaluate.

Exit codes: 0 success, 1 training fault (non-finite losses etc.), 2 usage or
configuration errors.  The output directory resolves in the order
``--out`` flag, ``out`` config key, ``SPAN_RL_OUT`` environment variable,
``./runs``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import os
import sys
from pathlib import Path
from typing import Dict, List

import numpy as np

from . import fileio, metrics, tanhgauss
from .config import RunConfig, config_to_text, parse_config, parse_config_text
from .envs import env_spec
from .errors import CheckpointError, ConfigError, SpanRlError, TrainingFault
from .iql import generate_dataset, iql_train
from .networks import network_from_meta
from .ppo import ppo_train
from .runner import evaluate_policy
from .sac import sac_train

USAGE_EXIT = 2
FAULT_EXIT = 1


def _resolve_out(flag_value, cfg_value) -> Path:
    out = flag_value or cfg_value or os.environ.get("SPAN_RL_OUT") or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _train_single_seed(cfg_text: str, seed: int, out_dir: str) -> str:
    """Worker: run one seed and write its artifacts. Returns the summary path."""
    cfg = parse_config_text(cfg_text)
    out = Path(out_dir)
    fingerprint = cfg.fingerprint()
    algo_cfg = cfg.algo_config()

    if cfg.algo == "ppo":
        result = ppo_train(cfg.env, cfg.net, cfg.arch(), algo_cfg, seed, fingerprint)
    elif cfg.algo == "sac":
        result = sac_train(cfg.env, cfg.net, cfg.arch(), algo_cfg, seed, fingerprint)
    else:
        ds_path = cfg.algo_overrides.get("dataset")
        if not ds_path:
            raise ConfigError("[iql] requires `dataset = <path>`")
        dataset = fileio.read_dataset(ds_path)
        result = iql_train(dataset, cfg.net, cfg.arch(), algo_cfg, seed, fingerprint)

    fileio.write_curve_csv(out / f"curve_seed{seed}.csv", result.summary.curve)
    fileio.write_summary_json(out / f"summary_seed{seed}.json", result.summary)
    actor = result.nets.get("actor")
    if actor is not None:
        fileio.save_network_checkpoint(
            out / f"checkpoint_seed{seed}.ckpt", actor,
            extra_meta={"env": cfg.env, "algo": cfg.algo, "seed": seed,
                        "fingerprint": fingerprint},
        )
    return str(out / f"summary_seed{seed}.json")


def _run_seeds(cfg: RunConfig, seeds, out: Path, parallel: int) -> List[str]:
    cfg_text = config_to_text(cfg)
    if parallel <= 1 or len(seeds) == 1:
        return [_train_single_seed(cfg_text, s, str(out)) for s in seeds]
    with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
        futures = {s: pool.submit(_train_single_seed, cfg_text, s, str(out)) for s in seeds}
        return [futures[s].result() for s in seeds]


def cmd_train(args) -> int:
    try:
        cfg = parse_config(args.config)
        if args.seeds:
            cfg.seeds = tuple(int(s) for s in args.seeds.split(","))
        out = _resolve_out(args.out, cfg.out_dir)
        _run_seeds(cfg, cfg.seeds, out, args.parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except TrainingFault as exc:
        print(f"training fault (seed {exc.seed}): {exc}", file=sys.stderr)
        return FAULT_EXIT
    print(f"wrote {len(cfg.seeds)} run(s) to {out}")
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = parse_config(args.config)
        if cfg.net != "span" and cfg.sweep:
            raise ConfigError("[sweep] axes apply to the span architecture only")
        if args.seeds:
            cfg.seeds = tuple(int(s) for s in args.seeds.split(","))
        out = _resolve_out(args.out, cfg.out_dir)

        variants = []
        if not any(cfg.sweep.values()):
            variants.append(("base", 0, dict(cfg.span)))
        for axis, values in cfg.sweep.items():
            for value in values:
                arch = dict(cfg.span)
                arch[axis] = value
                variants.append((axis, value, arch))

        rows = []
        for axis, value, arch in variants:
            vcfg = RunConfig(
                env=cfg.env, algo=cfg.algo, net=cfg.net, seeds=cfg.seeds,
                total_steps=cfg.total_steps, span=arch, mlp=cfg.mlp,
                algo_overrides=cfg.algo_overrides,
            )
            run_dir = out / f"sweep_{axis}_{value}"
            run_dir.mkdir(parents=True, exist_ok=True)
            paths = _run_seeds(vcfg, vcfg.seeds, run_dir, args.parallel)
            for seed, path in zip(vcfg.seeds, paths):
                summary = fileio.read_summary_json(path)
                final = summary.curve[-1].mean if summary.curve else float("nan")
                rows.append((axis, value, seed, final))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except TrainingFault as exc:
        print(f"training fault (seed {exc.seed}): {exc}", file=sys.stderr)
        return FAULT_EXIT

    sweep_csv = out / "sweep.csv"
    with open(sweep_csv, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["axis", "value", "seed", "final_return"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], repr(row[3])])
    print(f"wrote {len(rows)} sweep rows to {sweep_csv}")
    return 0


def _format_cell(median, rate):
    if median is None:
        return f"--- ({rate:.0%})"
    return f"{median / 1000.0:.0f}k ({rate:.0%})"


def cmd_report(args) -> int:
    results = Path(args.results_dir)
    if not results.is_dir():
        print(f"not a directory: {results}", file=sys.stderr)
        return USAGE_EXIT
    summaries = []
    for path in sorted(results.rglob("summary_seed*.json")):
        try:
            summaries.append(fileio.read_summary_json(path))
        except (ValueError, KeyError) as exc:
            print(f"skipping {path}: {exc}", file=sys.stderr)
    if not summaries:
        print("no run summaries found", file=sys.stderr)
        return USAGE_EXIT

    groups: Dict[tuple, List[metrics.RunSummary]] = {}
    for s in summaries:
        groups.setdefault((s.env, s.algo, s.net), []).append(s)

    out_dir = Path(args.out) if args.out else results
    out_dir.mkdir(parents=True, exist_ok=True)
    eff_rows, any_rows = [], []
    for (env, algo, net), runs in sorted(groups.items()):
        fingerprints = {r.fingerprint for r in runs}
        if len(fingerprints) > 1:
            print(f"refusing to aggregate {env}/{algo}/{net}: "
                  f"mismatched fingerprints {sorted(fingerprints)}", file=sys.stderr)
            return USAGE_EXIT
        budget = runs[0].total_steps

        print(f"\n== {env} / {algo} / {net}  ({len(runs)} seeds, budget {budget}) ==")
        cells = {}
        for pct in metrics.THRESHOLD_PERCENTS:
            median, rate = metrics.aggregate(runs, pct)
            cells[pct] = (median, rate)
        print("sample efficiency (median steps to sustained threshold, success rate):")
        print("  " + "  ".join(f"{pct}%: {_format_cell(*cells[pct])}"
                               for pct in metrics.THRESHOLD_PERCENTS))
        for pct in metrics.THRESHOLD_PERCENTS:
            median, rate = cells[pct]
            eff_rows.append([env, algo, net, pct,
                             "" if median is None else int(median), rate])

        table = metrics.anytime_table(runs, budget)
        print("anytime performance (mean +- std across seeds):")
        print("  " + "  ".join(
            f"{pct}%: {table[pct][0]:.1f}+-{table[pct][1]:.1f}"
            for pct in metrics.CHECKPOINT_PERCENTS))
        for pct in metrics.CHECKPOINT_PERCENTS:
            any_rows.append([env, algo, net, pct, table[pct][0], table[pct][1]])

    with open(out_dir / "efficiency.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["env", "algo", "net", "threshold_pct", "median_steps", "success_rate"])
        writer.writerows(eff_rows)
    with open(out_dir / "anytime.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["env", "algo", "net", "budget_pct", "mean", "std"])
        writer.writerows(any_rows)
    print(f"\nwrote {out_dir / 'efficiency.csv'} and {out_dir / 'anytime.csv'}")
    return 0


def cmd_dataset(args) -> int:
    try:
        cfg = parse_config(args.config)
        ds = cfg.dataset
        if not ds:
            raise ConfigError("missing [dataset] section")
        size = int(ds.get("size", 0))
        if size < 1:
            raise ConfigError("[dataset] size must be >= 1")
        tag = str(ds.get("tag", "unlabeled"))
        source = str(ds.get("source", "random"))
        if source == "checkpoint":
            source = str(ds.get("checkpoint", ""))
            if not source:
                raise ConfigError("[dataset] source=checkpoint requires `checkpoint = <path>`")
        if tag == "expert" and source in ("random", "scripted"):
            raise ConfigError("[dataset] tag=expert requires a trained policy checkpoint")
        out = _resolve_out(args.out, cfg.out_dir)
        dataset = generate_dataset(
            cfg.env, source, size, float(ds.get("noise", 0.0)),
            int(ds.get("seed", cfg.seeds[0])), tag,
        )
    except (ConfigError, CheckpointError, OSError, ValueError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return USAGE_EXIT

    stem = f"dataset_{cfg.env}_{tag}"
    fileio.write_dataset(out / f"{stem}.bin", dataset)
    import json

    with open(out / f"{stem}.meta.json", "w") as f:
        json.dump(dataset.meta, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {out / (stem + '.bin')} ({len(dataset)} transitions, "
          f"behavior return {dataset.meta['behavior_return']:.1f})")
    return 0


def cmd_evaluate(args) -> int:
    try:
        meta, arrays = fileio.read_checkpoint(args.checkpoint)
        net = network_from_meta(meta["network"], arrays)
        env_name = meta["env"]
        spec = env_spec(env_name)
    except (CheckpointError, OSError, KeyError) as exc:
        print(f"cannot load checkpoint: {exc}", file=sys.stderr)
        return USAGE_EXIT

    if spec.discrete:
        def act(obs_batch):
            return np.argmax(net.forward(obs_batch), axis=-1)
    elif meta.get("algo") == "iql":
        def act(obs_batch):
            return np.clip(net.forward(obs_batch), spec.action_low, spec.action_high)
    else:
        scale = spec.action_high.astype(np.float64)

        def act(obs_batch):
            mu, _ = tanhgauss.split_head(net.forward(obs_batch))
            return tanhgauss.mean_action(mu, scale)

    returns = evaluate_policy(env_name, args.seed, 0, act, args.episodes)
    print(f"{env_name}: mean return {np.mean(returns):.2f} +- {np.std(returns):.2f} "
          f"over {args.episodes} episodes")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spanrl")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seeds", default=None, help="comma-separated seed override")
        p.add_argument("--parallel", type=int, default=1, help="worker processes")

    p_train = sub.add_parser("train", help="train one config across seeds")
    add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="one-axis-at-a-time architecture sweep")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="aggregate run summaries into tables")
    p_report.add_argument("results_dir")
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(func=cmd_report)

    p_dataset = sub.add_parser("dataset", help="generate an offline dataset")
    p_dataset.add_argument("--config", required=True)
    p_dataset.add_argument("--out", default=None)
    p_dataset.set_defaults(func=cmd_dataset)

    p_eval = sub.add_parser("evaluate", help="evaluate a saved policy checkpoint")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("--episodes", type=int, default=30)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpanRlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAULT_EXIT


if __name__ == "__main__":
    sys.exit(main())
