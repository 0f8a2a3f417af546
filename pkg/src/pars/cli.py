"""Command-line entry point.

Subcommands:
  run       execute all seeds of a JSON experiment config
  gen-data  emit synthetic dataset CSVs (optionally with injected noise)
  sweep     re-run a config over values of one numeric parameter
  compare   run several configs and print a paired summary table
"""

import argparse
import json
import os
import sys

from . import data as data_mod
from . import harness
from .config import ConfigError, load_config, resolve_config


def _add_common(parser):
    parser.add_argument("--out", help="output directory (overrides config out_dir)")
    parser.add_argument(
        "--seeds", help="comma-separated seed list (overrides config seeds)"
    )
    parser.add_argument(
        "--workers", type=int, default=1, help="parallel seed processes (default 1)"
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pars", description="noise-robust training experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True, help="JSON experiment config")
    _add_common(p_run)

    p_gen = sub.add_parser("gen-data", help="write dataset CSVs")
    p_gen.add_argument("--kind", default="blobs", choices=data_mod.GENERATOR_KINDS)
    p_gen.add_argument("--classes", type=int, default=5)
    p_gen.add_argument("--dim", type=int, default=2)
    p_gen.add_argument("--per-class", type=int, default=400)
    p_gen.add_argument("--spread", type=float, default=1.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--noise", choices=data_mod.NOISE_KINDS)
    p_gen.add_argument("--ratio", type=float, default=0.0)
    p_gen.add_argument("--out", required=True, help="output directory")

    p_sweep = sub.add_parser("sweep", help="sweep one numeric config parameter")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True, help="e.g. tau or noise.ratio")
    p_sweep.add_argument("--values", required=True, help="comma-separated numbers")
    _add_common(p_sweep)

    p_cmp = sub.add_parser("compare", help="run and compare several configs")
    p_cmp.add_argument("--configs", required=True, nargs="+")
    _add_common(p_cmp)

    return parser


def _resolve_with_overrides(path, args):
    raw = load_config(path)
    if args.seeds:
        try:
            raw["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"seeds: expected integers, got {args.seeds!r}") from None
    resolved = resolve_config(raw)
    if args.out:
        resolved["out_dir"] = args.out
    if not resolved.get("out_dir"):
        raise ConfigError("out_dir: missing (set it in the config or pass --out)")
    return resolved


def _cmd_run(args):
    resolved = _resolve_with_overrides(args.config, args)
    artifacts = harness.run_experiment(resolved, resolved["out_dir"], args.workers)
    agg = artifacts.summary["aggregate"]["best_acc_online"]
    print(
        f"{len(resolved['seeds'])} seed(s) done: best acc "
        f"{agg['mean']:.4f} ± {agg['std']:.4f}  ->  {artifacts.summary_path}"
    )
    return 0


def _cmd_gen_data(args):
    train, test = data_mod.generate(
        args.kind, args.classes, args.dim, args.per_class, args.spread, args.seed
    )
    if args.noise:
        train = data_mod.inject_noise(
            train, data_mod.NoiseSpec(args.noise, args.ratio), args.seed
        )
    os.makedirs(args.out, exist_ok=True)
    train_path = os.path.join(args.out, "train.csv")
    test_path = os.path.join(args.out, "test.csv")
    data_mod.save_csv(train, train_path)
    data_mod.save_csv(test, test_path)
    print(f"wrote {train_path} ({len(train)} rows) and {test_path} ({len(test)} rows)")
    return 0


def _cmd_sweep(args):
    resolved = _resolve_with_overrides(args.config, args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"values: expected numbers, got {args.values!r}") from None
    if not values:
        raise ConfigError("values: empty list")
    summary = harness.run_sweep(
        resolved, args.param, values, resolved["out_dir"], args.workers
    )
    for entry in summary["results"]:
        print(
            f"{args.param}={entry['value']:g}: best acc "
            f"{entry['mean_best_acc_online']:.4f} ± {entry['std_best_acc_online']:.4f}"
        )
    print(f"best {args.param}: {summary['best_value']:g}")
    return 0


def _cmd_compare(args):
    resolved_list, names = [], []
    for path in args.configs:
        resolved = _resolve_with_overrides(path, args)
        resolved_list.append(resolved)
        names.append(os.path.splitext(os.path.basename(path))[0])
    out_dir = args.out or resolved_list[0]["out_dir"]
    summary = harness.run_compare(resolved_list, names, out_dir, args.workers)
    print(harness.format_compare_table(summary))
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "gen-data": _cmd_gen_data,
        "sweep": _cmd_sweep,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
