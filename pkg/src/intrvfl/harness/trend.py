"""Desk-scale trend check: the same datasets under four model configurations.

(a) intrvfl-rls vs rvfl-rls, (b) intrvfl-glvq over the P grid vs intrvfl-rls,
(c) intrvfl-glvq with a 10-iteration budget vs the full budget.
"""
import json
import time
from pathlib import Path

from .data import load_dataset
from .experiment import ExperimentConfig, run_experiment

RUNS = {
    "rvfl-rls": {"kind": "rvfl-rls"},
    "intrvfl-rls": {"kind": "intrvfl-rls"},
    "intrvfl-glvq": {"kind": "intrvfl-glvq"},
    "intrvfl-glvq-b10": {"kind": "intrvfl-glvq", "budget": 10},
}

TOLERANCE = {"a": 0.01, "b": 0.01, "c": 0.03}


def load_dir(data_dir, label_position="last", header=False):
    paths = sorted(Path(data_dir).glob("*.csv"))
    if not paths:
        raise FileNotFoundError(f"no .csv files in {data_dir}")
    return [load_dataset(p, label_position=label_position, header=header) for p in paths]


def trend_checks(means):
    """Pass/fail of the three comparisons given the mean accuracy per run."""
    a = means["intrvfl-rls"] - (means["rvfl-rls"] - TOLERANCE["a"])
    b = means["intrvfl-glvq"] - (means["intrvfl-rls"] - TOLERANCE["b"])
    c = TOLERANCE["c"] - (means["intrvfl-glvq"] - means["intrvfl-glvq-b10"])
    return {
        "a": {"passed": a > 0, "margin": a,
              "rule": "intrvfl-rls > rvfl-rls - 0.01"},
        "b": {"passed": b >= 0, "margin": b,
              "rule": "intrvfl-glvq >= intrvfl-rls - 0.01"},
        "c": {"passed": c >= 0, "margin": c,
              "rule": "intrvfl-glvq(budget 2500) - intrvfl-glvq(budget 10) <= 0.03"},
    }


def run_trend(datasets, threads=1, seeds=5, folds=4, out_dir=None, log=print):
    """Run every configuration in ``RUNS``; returns means, checks and timing."""
    results, means, times = {}, {}, {}
    for name, overrides in RUNS.items():
        cfg = ExperimentConfig(seeds=seeds, folds=folds, threads=threads, **overrides)
        t0 = time.perf_counter()
        res = run_experiment(cfg, datasets)
        times[name] = time.perf_counter() - t0
        failed = [d["name"] for d in res["datasets"] if d.get("status") != "ok"]
        if failed:
            raise RuntimeError(f"{name}: datasets failed: {failed}")
        results[name], means[name] = res, res["mean_accuracy"]
        log(f"{name:18s} mean accuracy {means[name]:.4f}  ({times[name]:.0f} s)")
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / f"{name}.json").write_text(json.dumps(res, indent=1))
    summary = {
        "datasets": [d.name for d in datasets],
        "seeds": seeds,
        "folds": folds,
        "means": means,
        "per_dataset": {n: {d["name"]: d["mean_accuracy"] for d in r["datasets"]} for n, r in results.items()},
        "checks": trend_checks(means),
        "wall_time_s": times,
        "total_wall_time_s": sum(times.values()),
    }
    if out_dir is not None:
        (Path(out_dir) / "summary.json").write_text(json.dumps(summary, indent=1))
    return summary, results
