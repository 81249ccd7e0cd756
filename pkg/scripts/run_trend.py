"""Desk-scale trend reproduction over every CSV in a directory.

    python3 scripts/run_trend.py --data data --out results/trend --threads 4
"""
import argparse
import logging
import os

from intrvfl.harness.trend import load_dir, run_trend


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--data", default="data")
    ap.add_argument("--out", default="results/trend")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--folds", type=int, default=4)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    summary, _ = run_trend(load_dir(args.data), threads=args.threads, seeds=args.seeds,
                           folds=args.folds, out_dir=args.out)
    for key, chk in summary["checks"].items():
        print(f"({key}) {'PASS' if chk['passed'] else 'FAIL'}  {chk['rule']}  margin {chk['margin']:+.4f}")
    print(f"total wall time {summary['total_wall_time_s']:.0f} s")


if __name__ == "__main__":
    main()
