"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..costmodel import CostInputs, cost_table
from .data import DataError, load_dataset, normalize
from .experiment import ExperimentConfig, compare_report, fit_dataset, grid_search, pairs_csv, run_experiment
from .experiment import dataset_id
from .pipeline import KINDS, Pipeline

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("intrvfl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number(token):
    token = token.strip()
    if "^" in token:
        base, exp = token.split("^", 1)
        return float(base) ** float(exp)
    return float(token)


def parse_grid(text, cast=float):
    """``"1,2,3"``, ``"2^-10,2^0"`` or a range ``"1:15"`` (inclusive, step 1)."""
    try:
        if ":" in text and "," not in text:
            lo, hi = (int(v) for v in text.split(":"))
            values = list(range(lo, hi + 1))
        else:
            values = [_number(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    if cast is int:
        if any(v != int(v) for v in values):
            raise argparse.ArgumentTypeError(f"grid {text!r} must be integers")
        return [int(v) for v in values]
    return [float(v) for v in values]


def _int_grid(text):
    return parse_grid(text, int)


def _add_data_args(p, multi=False):
    if multi:
        p.add_argument("--dataset", action="append", default=[], help="CSV file (repeatable)")
        p.add_argument("--dataset-dir", help="use every .csv file in this directory")
    else:
        p.add_argument("--dataset", required=True, help="CSV file")
    p.add_argument("--label-position", choices=["last", "first"], default="last")
    p.add_argument("--header", action="store_true", help="skip the first row")


def _add_experiment_args(p):
    p.add_argument("--model", choices=sorted(KINDS), default="intrvfl-glvq")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=2500)
    p.add_argument("--n-grid", type=_int_grid)
    p.add_argument("--kappa-grid", type=_int_grid)
    p.add_argument("--lambda-grid", type=parse_grid)
    p.add_argument("--beta-grid", type=parse_grid)
    p.add_argument("--p-grid", type=_int_grid)
    p.add_argument("--no-init-noise", action="store_true")
    p.add_argument("--no-reuse-rls-hidden", action="store_true",
                   help="search N and kappa for GLVQ kinds instead of reusing the RLS optimum")
    p.add_argument("--optimizer", choices=["lbfgs", "gd"], default="lbfgs")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="write JSON here instead of stdout")


def build_parser():
    ap = _Parser(prog="intrvfl", description="intRVFL / GLVQ / RLS experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="grid search and fit one model on one dataset")
    _add_data_args(p)
    _add_experiment_args(p)

    p = sub.add_parser("eval", help="score a fitted model on a file")
    p.add_argument("model_file")
    _add_data_args(p)
    p.add_argument("--out")

    p = sub.add_parser("grid", help="grid search scores on one dataset")
    _add_data_args(p)
    _add_experiment_args(p)

    p = sub.add_parser("bench", help="cross-validated experiment over datasets")
    _add_data_args(p, multi=True)
    _add_experiment_args(p)

    p = sub.add_parser("compare", help="pair two bench results")
    p.add_argument("result_a")
    p.add_argument("result_b")
    p.add_argument("--out", help="JSON summary path")
    p.add_argument("--csv", help="per-dataset pairs CSV path (default: next to --out)")

    p = sub.add_parser("cost", help="analytic flop counts")
    p.add_argument("--t", type=int, required=True, help="training samples")
    p.add_argument("--n", type=int, required=True, help="hidden neurons")
    p.add_argument("--l", type=int, required=True, help="classes")
    p.add_argument("--p", type=int, default=1, help="prototypes per class")
    p.add_argument("--i", type=int, default=0, help="GLVQ iterations")
    p.add_argument("--out")
    return ap


def config_from_args(args):
    grids = {f"{name}_grid": getattr(args, f"{name}_grid")
             for name in ("n", "kappa", "lambda", "beta", "p") if getattr(args, f"{name}_grid") is not None}
    try:
        return ExperimentConfig(kind=args.model, folds=args.folds, seeds=args.seeds, master_seed=args.master_seed,
                                budget=args.budget, optimizer=args.optimizer, init_noise=not args.no_init_noise,
                                reuse_rls_hidden=not args.no_reuse_rls_hidden, threads=args.threads, **grids)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load(path, args):
    return load_dataset(path, label_position=args.label_position, header=args.header)


def _emit(obj, out):
    text = json.dumps(obj, indent=1)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: {e}") from None


def cmd_fit(args):
    cfg = config_from_args(args)
    pipe, grid = fit_dataset(cfg, _load(args.dataset, args))
    model = pipe.to_dict()
    model["grid"] = grid.to_dict()
    model["config"] = cfg.to_dict()
    _emit(model, args.out)


def cmd_eval(args):
    d = _read_json(args.model_file)
    if d.get("schema") != "intrvfl.model/1":
        raise DataError(f"{args.model_file}: not a model file")
    pipe = Pipeline.from_dict(d)
    ds = _load(args.dataset, args)
    if pipe.feature_ranges is None or ds.k != len(pipe.feature_ranges):
        raise DataError(f"{args.dataset}: {ds.k} features, model expects "
                        f"{None if pipe.feature_ranges is None else len(pipe.feature_ranges)}")
    index = {name: i for i, name in enumerate(pipe.label_names)}
    unknown = sorted(set(ds.label_names) - set(index))
    if unknown:
        raise DataError(f"{args.dataset}: labels not seen in training: {unknown}")
    y = np.array([index[ds.label_names[v]] for v in ds.labels])
    pred = pipe.predict_raw(ds.features)
    _emit({"dataset": ds.name, "m": int(ds.m), "accuracy": float(np.mean(pred == y)),
           "predictions": [pipe.label_names[int(c)] for c in pred]}, args.out)


def cmd_grid(args):
    cfg = config_from_args(args)
    nds = normalize(_load(args.dataset, args))
    keys = (cfg.master_seed, dataset_id(nds.name), 0, 0)
    res = grid_search(cfg, cfg.kind, nds.features, nds.labels, nds.l, keys)
    _emit({"dataset": nds.name, "kind": cfg.kind, **res.to_dict()}, args.out)


def cmd_bench(args):
    cfg = config_from_args(args)
    paths = [Path(p) for p in args.dataset]
    if args.dataset_dir:
        found = sorted(Path(args.dataset_dir).glob("*.csv"))
        if not found:
            raise DataError(f"{args.dataset_dir}: no .csv files")
        paths += found
    if not paths:
        raise UsageError("give --dataset and/or --dataset-dir")
    datasets = [_load(p, args) for p in paths]
    res = run_experiment(cfg, datasets)
    _emit(res, args.out)
    if all(d.get("status") != "ok" for d in res["datasets"]):
        raise DataError("every dataset failed: " + "; ".join(d.get("error", "") for d in res["datasets"]))


def cmd_compare(args):
    a, b = _read_json(args.result_a), _read_json(args.result_b)
    try:
        summary = compare_report(a, b)
    except (KeyError, TypeError) as e:
        raise DataError(f"malformed result file: {e}") from None
    except ValueError as e:
        raise DataError(str(e)) from None
    _emit(summary, args.out)
    csv_path = args.csv or (str(Path(args.out).with_suffix(".csv")) if args.out else None)
    if csv_path:
        Path(csv_path).write_text(pairs_csv(summary))


def cmd_cost(args):
    try:
        c = CostInputs(t=args.t, n=args.n, l=args.l, p=args.p, i=args.i)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _emit(cost_table(c), args.out)


COMMANDS = {"fit": cmd_fit, "eval": cmd_eval, "grid": cmd_grid, "bench": cmd_bench,
            "compare": cmd_compare, "cost": cmd_cost}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"intrvfl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"intrvfl: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"intrvfl: numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # remaining value errors come from inconsistent inputs (e.g. too few samples for the folds)
        print(f"intrvfl: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
