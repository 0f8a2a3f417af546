"""Experiment harness: runs all seeds of a config, writes metrics and
confidence CSVs, summary JSON, and drives parameter sweeps and config
comparisons. Seeds are independent and may execute in parallel processes;
each writes to its own files and results do not depend on scheduling.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import nn, trainer
from .config import build_train_config, resolve_config, set_by_path
from .data import UNLABELED


@dataclass(frozen=True)
class RunArtifacts:
    out_dir: str
    resolved_config_path: str
    metrics_paths: dict  # seed -> csv path
    confidence_paths: dict  # seed -> csv path
    summary_path: str
    summary: dict


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def emit_metrics(records, path):
    """Per-epoch CSV, one row per record, floats at 9 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trainer.MetricsRecord.CSV_COLUMNS)
        for record in records:
            writer.writerow([_fmt(v) for v in record.row()])


def emit_confidences(result, path):
    """Train-split max confidences from the final online net, tagged by
    whether the noisy label agrees with the clean one (-1 for unlabeled)."""
    ds = result.train_dataset
    probs = nn.predict_probs(result.final_params, ds.features)
    max_conf = probs.max(axis=1)
    agree = np.where(
        ds.noisy_labels == UNLABELED,
        -1,
        (ds.noisy_labels == ds.clean_labels).astype(np.int64),
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "max_confidence", "noisy_equals_clean"])
        for i in range(len(ds)):
            writer.writerow([i, _fmt(max_conf[i]), int(agree[i])])


def run_seed(resolved, seed, out_dir):
    """Train one seed and write its per-seed artifacts."""
    cfg = build_train_config(resolved, seed)
    result = trainer.train(cfg)
    metrics_path = os.path.join(out_dir, f"metrics_seed{seed}.csv")
    confidence_path = os.path.join(out_dir, f"confidence_seed{seed}.csv")
    emit_metrics(result.records, metrics_path)
    emit_confidences(result, confidence_path)
    return {
        "seed": seed,
        "best_acc_online": result.best_acc_online,
        "best_epoch_online": result.best_epoch_online,
        "best_acc_ema": result.best_acc_ema,
        "best_epoch_ema": result.best_epoch_ema,
        "final_acc_online": result.records[-1].test_acc_online,
        "final_acc_ema": result.records[-1].test_acc_ema,
        "metrics_csv": metrics_path,
        "confidence_csv": confidence_path,
    }


def _aggregate(per_seed):
    keys = ("best_acc_online", "best_acc_ema", "final_acc_online", "final_acc_ema")
    out = {}
    for key in keys:
        values = np.array([entry[key] for entry in per_seed])
        out[key] = {"mean": float(values.mean()), "std": float(values.std())}
    return out


def run_experiment(resolved, out_dir, workers=1):
    """Run every seed of a resolved config and write all artifacts."""
    os.makedirs(out_dir, exist_ok=True)
    config_path = os.path.join(out_dir, "resolved_config.json")
    with open(config_path, "w") as fh:
        json.dump({**resolved, "out_dir": out_dir}, fh, indent=2)
        fh.write("\n")
    seeds = resolved["seeds"]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_seed, resolved, s, out_dir) for s in seeds]
            per_seed = [f.result() for f in futures]
    else:
        per_seed = [run_seed(resolved, s, out_dir) for s in seeds]
    per_seed.sort(key=lambda e: seeds.index(e["seed"]))
    summary = {
        "mode": resolved["mode"],
        "seeds": seeds,
        "per_seed": per_seed,
        "aggregate": _aggregate(per_seed),
    }
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return RunArtifacts(
        out_dir=out_dir,
        resolved_config_path=config_path,
        metrics_paths={e["seed"]: e["metrics_csv"] for e in per_seed},
        confidence_paths={e["seed"]: e["confidence_csv"] for e in per_seed},
        summary_path=summary_path,
        summary=summary,
    )


def run_sweep(resolved, param, values, out_dir, workers=1):
    """Re-run the config once per override value of a numeric parameter."""
    os.makedirs(out_dir, exist_ok=True)
    results = []
    for value in values:
        variant = resolve_config(set_by_path(json.loads(json.dumps(resolved)), param, value))
        sub_dir = os.path.join(out_dir, f"{param.replace('.', '_')}={value:g}")
        artifacts = run_experiment(variant, sub_dir, workers=workers)
        results.append(
            {
                "value": value,
                "dir": sub_dir,
                "mean_best_acc_online": artifacts.summary["aggregate"][
                    "best_acc_online"
                ]["mean"],
                "std_best_acc_online": artifacts.summary["aggregate"][
                    "best_acc_online"
                ]["std"],
            }
        )
    best = max(results, key=lambda r: r["mean_best_acc_online"])
    summary = {
        "param": param,
        "values": list(values),
        "results": results,
        "best_value": best["value"],
    }
    path = os.path.join(out_dir, "sweep_summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def run_compare(resolved_configs, names, out_dir, workers=1):
    """Run several configs and produce a paired summary table."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, (resolved, name) in enumerate(zip(resolved_configs, names)):
        sub_dir = os.path.join(out_dir, f"cmp{i}_{name}")
        artifacts = run_experiment(resolved, sub_dir, workers=workers)
        entries.append(
            {
                "name": name,
                "dir": sub_dir,
                "seeds": resolved["seeds"],
                "aggregate": artifacts.summary["aggregate"],
                "per_seed_best_online": [
                    e["best_acc_online"] for e in artifacts.summary["per_seed"]
                ],
            }
        )
    base = entries[0]["aggregate"]["best_acc_online"]["mean"]
    for entry in entries:
        entry["delta_best_online_vs_first"] = (
            entry["aggregate"]["best_acc_online"]["mean"] - base
        )
    summary = {"configs": entries}
    path = os.path.join(out_dir, "compare_summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def format_compare_table(summary):
    lines = [
        f"{'config':24s} {'best mean':>10s} {'best std':>9s} {'final mean':>11s} {'delta':>8s}"
    ]
    for entry in summary["configs"]:
        agg = entry["aggregate"]
        lines.append(
            f"{entry['name'][:24]:24s} "
            f"{agg['best_acc_online']['mean']:10.4f} "
            f"{agg['best_acc_online']['std']:9.4f} "
            f"{agg['final_acc_online']['mean']:11.4f} "
            f"{entry['delta_best_online_vs_first']:+8.4f}"
        )
    return "\n".join(lines)
