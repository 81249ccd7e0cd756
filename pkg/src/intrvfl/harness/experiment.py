"""Cross-validated experiments: grid search, multi-seed runs, comparisons."""
import logging
import platform
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone

import numpy as np
from scipy import stats

from .. import __version__
from ..classifiers import one_hot, rls_path
from ..costmodel import CostInputs, flops_glvq, flops_rls_direct, flops_rls_qr
from .data import normalize, stratified_folds, stratified_holdout
from .pipeline import HIDDEN_PARAMS, READOUT_PARAMS, FitOptions, HiddenLayer, Hyper, fit_model, fit_readout, \
    readout_predict, split_kind

log = logging.getLogger(__name__)

RESULT_SCHEMA = "intrvfl.experiment/1"

# RLS companion whose optimal hidden size a GLVQ kind reuses (two-phase mode)
RLS_COMPANION = {"rvfl-glvq": "rvfl-rls", "intrvfl-glvq": "intrvfl-rls"}

# stream tags for derive_seed
_FOLDS, _ENCODER, _INNER, _GRID, _FINAL = range(5)


def derive_seed(*keys):
    """Deterministic 63-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint64)[0] >> 1)


def dataset_id(name):
    return zlib.crc32(name.encode())


@dataclass
class ExperimentConfig:
    kind: str = "intrvfl-glvq"
    n_grid: list = field(default_factory=lambda: [50, 100, 250, 500, 1000, 1500])
    kappa_grid: list = field(default_factory=lambda: [1, 3, 7, 15])
    lambda_grid: list = field(default_factory=lambda: [2.0 ** e for e in range(-10, 6)])
    beta_grid: list = field(default_factory=lambda: [float(b) for b in range(1, 16)])
    p_grid: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    budget: int = 2500
    seeds: int = 5
    master_seed: int = 0
    folds: int = 4
    inner_fraction: float = 0.2
    optimizer: str = "lbfgs"
    gd_step: float = 0.01
    init_noise: bool = True
    reuse_rls_hidden: bool = True
    lbfgs_m: int = 10
    gtol: float = 1e-5
    ftol: float = 2.22e-9
    perceptron_alpha: float = 0.05
    perceptron_iters: int = 10
    threads: int = 1

    def __post_init__(self):
        split_kind(self.kind)
        if self.optimizer not in ("lbfgs", "gd"):
            raise ValueError("optimizer must be 'lbfgs' or 'gd'")
        if self.seeds < 1 or self.folds < 2 or self.budget < 0:
            raise ValueError("need seeds >= 1, folds >= 2, budget >= 0")

    def fit_options(self):
        return FitOptions(budget=self.budget, optimizer=self.optimizer, init_noise=self.init_noise,
                          lbfgs_m=self.lbfgs_m, gtol=self.gtol, ftol=self.ftol, gd_step=self.gd_step,
                          perceptron_alpha=self.perceptron_alpha, perceptron_iters=self.perceptron_iters)

    def to_dict(self):
        d = asdict(self)
        d.pop("threads")
        return d


def grid_points(cfg, kind, fixed=None):
    """Hyperparameter grid for ``kind`` in declared order (N, kappa, lambda, beta, P)."""
    family, readout = split_kind(kind)
    fixed = fixed or {}
    used = HIDDEN_PARAMS[family] + READOUT_PARAMS[readout]
    axes = {
        "n": cfg.n_grid, "kappa": cfg.kappa_grid, "lam": cfg.lambda_grid,
        "beta": cfg.beta_grid, "p": cfg.p_grid,
    }
    names = [a for a in ("n", "kappa", "lam", "beta", "p") if a in used]
    values = [[fixed[a]] if a in fixed else sorted(axes[a]) for a in names]
    if any(len(v) == 0 for v in values):
        raise ValueError("empty hyperparameter grid")
    for combo in np.ndindex(*[len(v) for v in values]):
        yield Hyper(**{a: v[i] for a, v, i in zip(names, values, combo)})


@dataclass
class GridResult:
    best: Hyper
    best_score: float
    scores: list  # [(Hyper, accuracy)] in grid order
    max_iterations: int = 0

    def to_dict(self):
        return {"best": self.best.to_dict(), "best_score": self.best_score,
                "max_iterations": self.max_iterations,
                "scores": [[h.to_dict(), s] for h, s in self.scores]}


def grid_search(cfg, kind, x, y, l, keys, fixed=None):
    """Pick hyperparameters on a stratified holdout of the training portion.

    ``keys`` = (master seed, dataset id, seed index, fold) feeds every RNG
    stream, so results are independent of scheduling.  Ties go to the earliest
    grid point.
    """
    family, readout = split_kind(kind)
    if fixed is None and cfg.reuse_rls_hidden and kind in RLS_COMPANION:
        companion = grid_search(cfg, RLS_COMPANION[kind], x, y, l, keys)
        fixed = {a: getattr(companion.best, a) for a in HIDDEN_PARAMS[family]}
    val = stratified_holdout(y, cfg.inner_fraction, derive_seed(*keys, _INNER))
    x_tr, y_tr, x_va, y_va = x[~val], y[~val], x[val], y[val]
    if len(y_va) == 0:
        x_va, y_va = x_tr, y_tr
    enc_seed = derive_seed(keys[0], keys[1], keys[2], _ENCODER)
    opts = cfg.fit_options()
    points = list(grid_points(cfg, kind, fixed))
    scores = [None] * len(points)
    max_iter = 0
    cache = {}

    def activations(hyper):
        hl_key = (hyper.n,)
        if hl_key not in cache:
            layer = HiddenLayer(family, x.shape[1], hyper.n, hyper.kappa or 1, enc_seed)
            cache.clear()
            cache[hl_key] = (layer, layer.raw(x_tr), layer.raw(x_va))
        layer, r_tr, r_va = cache[hl_key]
        return layer.finish(r_tr, hyper.kappa), layer.finish(r_va, hyper.kappa)

    i = 0
    while i < len(points):
        hyper = points[i]
        h_tr, h_va = activations(hyper)
        if readout == "rls":
            # all lambdas sharing this hidden layer in one SVD
            j = i
            while j < len(points) and replace(points[j], lam=None) == replace(hyper, lam=None):
                j += 1
            for k, ro in zip(range(i, j), rls_path(h_tr, one_hot(y_tr, l), [p.lam for p in points[i:j]])):
                scores[k] = float(np.mean(readout_predict(ro, h_va) == y_va))
            i = j
            continue
        rng = np.random.default_rng(derive_seed(*keys, _GRID, i))
        model, report = fit_readout(readout, h_tr, y_tr, l, hyper, opts, rng)
        if report is not None:
            max_iter = max(max_iter, report.result.iterations)
        scores[i] = float(np.mean(readout_predict(model, h_va) == y_va))
        i += 1
    best = int(np.argmax(scores))
    return GridResult(points[best], scores[best], list(zip(points, scores)), max_iter)


def flop_counts(kind, t, n, l, p=1, iterations=0):
    c = CostInputs(t=t, n=n, l=l, p=p, i=iterations)
    out = {"T": t, "N": n, "L": l, "P": p, "I": iterations,
           "rls_direct": flops_rls_direct(c), "rls_qr": flops_rls_qr(c)}
    out["qr_ratio"] = out["rls_qr"] / out["rls_direct"]
    if split_kind(kind)[1] == "glvq":
        out["glvq"] = flops_glvq(c)
        out["glvq_ratio"] = out["glvq"] / out["rls_direct"]
    return out


def fit_fold(cfg, ds, seed_index, fold, folds):
    """Grid search and refit on the training part of one outer fold of a
    normalized dataset; the test rows are never touched."""
    keys = (cfg.master_seed, dataset_id(ds.name), seed_index, fold)
    train = folds != fold
    x_tr, y_tr = ds.features[train], ds.labels[train]
    grid = grid_search(cfg, cfg.kind, x_tr, y_tr, ds.l, keys)
    enc_seed = derive_seed(keys[0], keys[1], keys[2], _ENCODER)
    pipe = fit_model(cfg.kind, grid.best, x_tr, y_tr, ds.l, enc_seed, derive_seed(*keys, _FINAL),
                     cfg.fit_options())
    return pipe, grid


def _run_fold(cfg, ds, seed_index, fold, folds):
    train, test = folds != fold, folds == fold
    t0 = time.perf_counter()
    pipe, grid = fit_fold(cfg, ds, seed_index, fold, folds)
    acc = float(np.mean(pipe.predict(ds.features[test]) == ds.labels[test]))
    iters = pipe.report.result.iterations if pipe.report is not None else 0
    return {
        "fold": fold,
        "n_train": int(train.sum()),
        "n_test": int(test.sum()),
        "accuracy": acc,
        "hyper": grid.best.to_dict(),
        "inner_score": grid.best_score,
        "inner_max_iterations": grid.max_iterations,
        "optimizer": pipe.report.to_dict() if pipe.report is not None else None,
        "flops": flop_counts(cfg.kind, int(train.sum()), pipe.hidden.n, ds.l, grid.best.p or 1, iters),
        "wall_time_s": time.perf_counter() - t0,
    }


def fit_dataset(cfg, ds, seed_index=0):
    """Grid search on all of ``ds`` and refit; returns ``(Pipeline, GridResult)``.

    ``ds`` is normalized here and its ranges and label names travel with the
    pipeline so raw files can be scored later.
    """
    nds = normalize(ds)
    keys = (cfg.master_seed, dataset_id(ds.name), seed_index, 0)
    grid = grid_search(cfg, cfg.kind, nds.features, nds.labels, nds.l, keys)
    enc_seed = derive_seed(keys[0], keys[1], keys[2], _ENCODER)
    pipe = fit_model(cfg.kind, grid.best, nds.features, nds.labels, nds.l, enc_seed,
                     derive_seed(*keys, _FINAL), cfg.fit_options())
    pipe.feature_ranges, pipe.label_names = nds.feature_ranges, list(nds.label_names)
    return pipe, grid


def _fold_task(args):
    cfg, nds, s, f, folds = args
    try:
        return _run_fold(cfg, nds, s, f, folds)
    except Exception as e:  # noqa: BLE001 - recorded per dataset
        log.warning("dataset %s seed %d fold %d failed: %s", nds.name, s, f, e)
        return {"error": f"{type(e).__name__}: {e}"}


def run_experiment(cfg, datasets):
    """Outer stratified k-fold x seeds for each dataset.

    Datasets are normalized here.  A failing dataset is recorded with its
    error and skipped.
    """
    prepared, units = [], []
    for ds in datasets:
        entry = {"name": ds.name, "m": int(ds.m), "k": int(ds.k), "l": int(ds.l)}
        try:
            nds = normalize(ds)
            folds = stratified_folds(nds.labels, cfg.folds, derive_seed(cfg.master_seed, dataset_id(ds.name), _FOLDS))
        except Exception as e:  # noqa: BLE001 - recorded per dataset
            entry.update(status="error", error=f"{type(e).__name__}: {e}")
            prepared.append((entry, None, None))
            continue
        prepared.append((entry, nds, folds))
        units += [(len(prepared) - 1, s, f) for s in range(cfg.seeds) for f in range(cfg.folds)]

    started = time.perf_counter()
    args = [(cfg, prepared[di][1], s, f, prepared[di][2]) for di, s, f in units]
    if cfg.threads > 1 and len(units) > 1:
        # separate processes: the fits are Python-bound and would serialize on the GIL
        with ProcessPoolExecutor(min(cfg.threads, len(units))) as pool:
            records = list(pool.map(_fold_task, args))
    else:
        records = list(map(_fold_task, args))
    done = dict(zip(units, records))

    results = []
    for di, (entry, nds, _) in enumerate(prepared):
        if nds is None:
            results.append(entry)
            continue
        per_seed = []
        errors = []
        for s in range(cfg.seeds):
            fold_recs = [done[(di, s, f)] for f in range(cfg.folds)]
            errors += [r["error"] for r in fold_recs if "error" in r]
            per_seed.append({"seed_index": s, "folds": fold_recs})
        if errors:
            entry.update(status="error", error=errors[0])
        else:
            for rec in per_seed:
                rec["mean_accuracy"] = float(np.mean([r["accuracy"] for r in rec["folds"]]))
            entry.update(status="ok", seeds=per_seed,
                         mean_accuracy=float(np.mean([r["mean_accuracy"] for r in per_seed])))
        results.append(entry)
    ok = [r["mean_accuracy"] for r in results if r.get("status") == "ok"]
    return {
        "schema": RESULT_SCHEMA,
        "config": cfg.to_dict(),
        "protocol": {
            "outer": f"stratified {cfg.folds}-fold, folds fixed per dataset across seeds",
            "inner": f"single stratified holdout, fraction {cfg.inner_fraction}",
            "normalization": "whole-dataset min-max to [0, 1] (test rows share the scaling ranges)",
            "rvfl_hidden": "logistic(x W + b), W, b ~ U(-1, 1): stand-in for the conventional RVFL",
            "glvq_hidden_size": "reused from RLS companion grid" if cfg.reuse_rls_hidden else "own grid",
        },
        "environment": {
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_time_s": time.perf_counter() - started,
        },
        "datasets": results,
        "mean_accuracy": float(np.mean(ok)) if ok else None,
    }


def strip_volatile(result):
    """Copy of a result without timestamps and wall-clock timings."""
    if isinstance(result, dict):
        return {k: strip_volatile(v) for k, v in result.items()
                if k not in ("timestamp", "wall_time_s", "environment")}
    if isinstance(result, list):
        return [strip_volatile(v) for v in result]
    return result


def _pearson(a, b):
    if np.std(a) == 0 or np.std(b) == 0:
        return None
    return float(stats.pearsonr(a, b)[0])


def compare_report(a, b):
    """Per-dataset accuracy pairs, mean difference, Pearson r and paired t-test."""
    acc_a = {d["name"]: d["mean_accuracy"] for d in a["datasets"] if d.get("status") == "ok"}
    acc_b = {d["name"]: d["mean_accuracy"] for d in b["datasets"] if d.get("status") == "ok"}
    if sorted(acc_a) != sorted(acc_b):
        raise ValueError(f"dataset lists differ: {sorted(set(acc_a) ^ set(acc_b))}")
    names = [d["name"] for d in a["datasets"] if d["name"] in acc_a]
    xa, xb = np.array([acc_a[n] for n in names]), np.array([acc_b[n] for n in names])
    diff = xb - xa
    if len(names) < 2 or np.all(diff == diff[0]):
        # zero-variance differences: the t statistic is undefined
        p_value = 1.0 if len(names) and np.all(diff == 0) else None
        t_defined = False
    else:
        p_value, t_defined = float(stats.ttest_rel(xb, xa).pvalue), True
    return {
        "kind_a": a["config"]["kind"],
        "kind_b": b["config"]["kind"],
        "pairs": [{"dataset": n, "a": float(u), "b": float(v)} for n, u, v in zip(names, xa, xb)],
        "mean_a": float(xa.mean()) if names else None,
        "mean_b": float(xb.mean()) if names else None,
        "mean_difference": float(diff.mean()) if names else None,
        "pearson_r": _pearson(xa, xb) if len(names) >= 2 else None,
        "paired_t_p_value": p_value,
        "t_test_defined": t_defined,
    }


def pairs_csv(summary):
    lines = ["dataset,a,b"]
    lines += [f"{p['dataset']},{p['a']!r},{p['b']!r}" for p in summary["pairs"]]
    return "\n".join(lines) + "\n"
