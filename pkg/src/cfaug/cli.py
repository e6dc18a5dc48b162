"""Command-line entry point: ``cfaug {gen,corr-sweep,n-sweep,bounds,textflow}``.

Configuration comes from an optional JSON file and is then overridden by
flags. The file may be flat (keys of the subcommand's config) or namespaced
by subcommand, e.g. ``{"corr_sweep": {...}, "textflow": {...}}``.

Exit codes: 0 when every cell succeeds, 2 when some cells failed (their
errors are in the errors CSV), 1 for invalid configuration or inputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .augment import (
    MatchConfig,
    build_augmented_dataset,
    corrupt_counterfactuals,
    diff_in_diff,
    oracle_set,
    write_augmented_csv,
)
from .dgp import sample_panel_dataset, write_dataset_csv
from .metrics import JointTable, mutual_information
from .textflow import TextflowConfig, run_textflow, write_reviews

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
SUBCOMMANDS = ("gen", "corr-sweep", "n-sweep", "bounds", "textflow")


class ConfigError(ValueError):
    pass


def load_config(path, section: str, allowed) -> dict:
    """Read the JSON config and return the part for ``section``."""
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    key = section.replace("-", "_")
    sections = {s.replace("-", "_") for s in SUBCOMMANDS}
    if any(k in sections for k in raw):
        raw = raw.get(key, {})
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys for {section}: {unknown}")
    return dict(raw)


def _field_names(cls) -> list[str]:
    return [f.name for f in dataclasses.fields(cls)]


def sweep_config(args, section: str) -> ex.SweepConfig:
    values = load_config(args.config, section, _field_names(ex.SweepConfig))
    overrides = {
        "base_seed": args.seed, "out_dir": args.out_dir, "parallelism": args.parallelism,
        "repetitions": getattr(args, "repetitions", None), "n_train": getattr(args, "n_train", None),
        "methods": getattr(args, "methods", None), "lambdas": getattr(args, "lambdas", None),
        "n_mc": getattr(args, "n_mc", None),
    }
    if getattr(args, "mi_bucket", None) is not None:
        overrides["mi_grid"] = [list(args.mi_bucket)]
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ex.n_sweep_defaults(**values) if section == "n-sweep" else ex.corr_sweep_defaults(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _finish(rows, errors, out: Path, name: str, columns=None) -> int:
    ex.write_rows(rows, out / f"{name}.csv", columns)
    ex.write_rows(errors, out / f"{name}_errors.csv", ex.ERROR_COLUMNS)
    print(f"wrote {len(rows)} rows to {out / (name + '.csv')}")
    if errors:
        print(f"{len(errors)} failed cells, see {out / (name + '_errors.csv')}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = sweep_config(args, args.command)
    name = args.command.replace("-", "_")
    out = Path(cfg.out_dir)
    rows, errors = ex.run_sweep(cfg)
    summary = ex.summarize(rows)
    ex.write_rows(summary, out / f"{name}_summary.csv")
    for s in summary:
        lam = "" if s["lam"] != s["lam"] else f"({s['lam']})"
        print(f"  [{s['mi_lo']}, {s['mi_hi']}] N={s['n_train']:<5d} {s['method'] + lam:<18s} "
              f"{s['mean_ood_acc']:.4f} +- {s['se']:.4f}")
    if args.command == "n-sweep":
        crossed = ex.crossing(summary, lam=min(cfg.lambdas, default=0.2))
        if crossed is not None:
            print(f"reweighting crosses aug(lambda={min(cfg.lambdas)}): {crossed}")
    return _finish(rows, errors, out, name, ex.SWEEP_COLUMNS)


def cmd_bounds(args) -> int:
    cfg = sweep_config(args, "bounds")
    try:
        rows, errors = ex.run_bounds(cfg, args.model)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    return _finish(rows, errors, Path(cfg.out_dir), "bounds")


def cmd_gen(args) -> int:
    """Write one cell's training data, its P(C | Y) table and an augmented copy."""
    cfg = sweep_config(args, "gen")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bucket, rep, n = 0, args.rep, cfg.n_train[0]
    dgp = ex.cell_dgp(cfg, bucket, rep)
    rng = np.random.default_rng(ex.derive_seed(cfg.base_seed, "data", bucket, rep, n))
    train = sample_panel_dataset(dgp, n, rng)
    write_dataset_csv(train, out / "train.csv")
    joint = dgp.joint_table()
    ex.write_rows([{"y": y, "c": c, "p_c_given_y": dgp.p_c_given_y[y, c], "p_joint": joint[y, c]}
                   for y in range(dgp.num_classes) for c in range(dgp.num_attributes)],
                  out / "table.csv")
    mi = mutual_information(JointTable(joint), base=2)
    if args.augment == "oracle":
        cfs = oracle_set(dgp, train)
    elif args.augment == "corrupt":
        lam = cfg.lambdas[0]
        cfs = corrupt_counterfactuals(dgp, train, lam, np.random.default_rng(
            ex.derive_seed(cfg.base_seed, "method", bucket, rep, n, "aug_corrupt", float(lam))),
            cfg.corruption_mode)
    else:
        cfs = diff_in_diff(train, MatchConfig("exact_key"), on_missing="drop")
    aug = build_augmented_dataset(train, cfs, allow_missing=True)
    write_augmented_csv(aug, out / "augmented.csv")
    if args.fit:
        model, _ = ex.train_method(args.fit, cfg.lambdas[0], dgp, train, cfg, np.random.default_rng(
            ex.derive_seed(cfg.base_seed, "method", bucket, rep, n, args.fit, float(cfg.lambdas[0]))))
        model.save(out / "model.txt")
    print(f"wrote {len(train)} training and {len(aug)} augmented rows to {out} (I(Y;C) = {mi:.4f} bits)")
    return EXIT_OK


def cmd_textflow(args) -> int:
    values = load_config(args.config, "textflow", _field_names(TextflowConfig))
    overrides = {"seed": args.seed, "reviews_csv": args.reviews, "endpoint": args.endpoint,
                 "pool_size": args.pool_size}
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "modes" in values:
        values["modes"] = tuple(values["modes"])
    try:
        cfg = TextflowConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    res = run_textflow(cfg)
    ex.write_rows(res.metrics, out / "textflow_metrics.csv")
    write_reviews([r for mode in cfg.modes for r in res.augmented.get(mode, [])],
                  out / "textflow_augmented.csv")
    errors = [{"mode": m, "request": i, "error": msg} for m, i, msg in res.errors]
    ex.write_rows(errors, out / "textflow_errors.csv", ["mode", "request", "error"])
    for m in res.metrics:
        print(f"  {m['mode']:<15s} eval_acc={m['eval_acc']:.4f} n_aug={m['n_aug']}")
    return EXIT_PARTIAL if errors else EXIT_OK


def _interval(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file, flat or namespaced by subcommand")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--out-dir", help="output directory (default: out)")
    common.add_argument("--parallelism", type=int, help="worker processes for sweep cells")

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--repetitions", type=int)
    sweep.add_argument("--n-train", type=int, nargs="+")
    sweep.add_argument("--methods", nargs="+", choices=ex.METHODS)
    sweep.add_argument("--lambdas", type=float, nargs="+")
    sweep.add_argument("--n-mc", type=int, help="Monte-Carlo test size per cell")
    sweep.add_argument("--mi-bucket", type=_interval, metavar="LO,HI",
                       help="single MI interval in bits, replacing the grid")

    p = argparse.ArgumentParser(prog="cfaug", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen", parents=[common, sweep], help="sample one cell's data")
    g.add_argument("--rep", type=int, default=0)
    g.add_argument("--augment", choices=("oracle", "corrupt", "diff_in_diff"), default="oracle")
    g.add_argument("--fit", choices=ex.METHODS, help="also fit and save this method's model")
    sub.add_parser("corr-sweep", parents=[common, sweep], help="accuracy across MI buckets")
    sub.add_parser("n-sweep", parents=[common, sweep], help="accuracy across training sizes")
    b = sub.add_parser("bounds", parents=[common, sweep], help="generalization bound reports")
    b.add_argument("--model", help="saved model artifact to evaluate instead of in-sweep fits")
    t = sub.add_parser("textflow", parents=[common], help="review rewriting pipeline")
    t.add_argument("--reviews", help="review CSV; a synthetic pool is used when omitted")
    t.add_argument("--pool-size", type=int)
    t.add_argument("--endpoint", help="rewriter HTTP endpoint; the mock rewriter when omitted")
    return p


COMMANDS = {"gen": cmd_gen, "corr-sweep": cmd_sweep, "n-sweep": cmd_sweep,
            "bounds": cmd_bounds, "textflow": cmd_textflow}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
