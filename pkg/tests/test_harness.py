import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intrvfl.classifiers import one_hot, rls_fit
from intrvfl.harness import cli
from intrvfl.harness.data import (
    DataError,
    Dataset,
    apply_ranges,
    load_dataset,
    normalize,
    stratified_folds,
    stratified_holdout,
)
from intrvfl.harness.experiment import (
    ExperimentConfig,
    compare_report,
    derive_seed,
    fit_fold,
    grid_points,
    grid_search,
    pairs_csv,
    run_experiment,
    strip_volatile,
)
from intrvfl.harness.pipeline import FitOptions, HiddenLayer, Hyper, Pipeline, fit_model


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def blobs(seed=0, m_per=15, l=3, k=4, spread=0.08):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.2, 0.8, size=(l, k))
    x = np.vstack([c + spread * rng.normal(size=(m_per, k)) for c in centers])
    y = np.repeat(np.arange(l), m_per)
    return Dataset("blobs", x, y, l, [str(c) for c in range(l)])


def small_cfg(**kw):
    base = dict(seeds=1, folds=3, budget=5, n_grid=[50], kappa_grid=[3], lambda_grid=[0.5],
                beta_grid=[2.0], p_grid=[1])
    base.update(kw)
    return ExperimentConfig(**base)


# ---- loading ----

def test_load_three_rows(tmp_path):
    ds = load_dataset(write(tmp_path, "1,2,3,4,a\n5,6,7,8,b\n9,10,11,12,a\n"))
    assert (ds.m, ds.k, ds.l) == (3, 4, 2)


def test_labels_by_first_appearance(tmp_path):
    ds = load_dataset(write(tmp_path, "0,a\n1,b\n2,a\n"))
    assert ds.labels.tolist() == [0, 1, 0] and ds.label_names == ["a", "b"]


def test_label_first_and_header(tmp_path):
    ds = load_dataset(write(tmp_path, "cls,f1,f2\nx,1,2\ny,3,4\n"), label_position="first", header=True)
    assert ds.features.tolist() == [[1, 2], [3, 4]] and ds.label_names == ["x", "y"]


def test_ragged_row_reports_line(tmp_path):
    p = write(tmp_path, "1,2,3,4,a\n1,2,3,4,b\n1,2,a\n1,2,3,4,b\n")
    with pytest.raises(DataError, match=r":3: ragged row"):
        load_dataset(p)


def test_non_numeric_reports_line_and_column(tmp_path):
    p = write(tmp_path, "1,2,a\n1,oops,b\n")
    with pytest.raises(DataError, match=r":2: non-numeric feature 'oops' in column 2"):
        load_dataset(p)


def test_empty_file(tmp_path):
    with pytest.raises(DataError, match="no samples"):
        load_dataset(write(tmp_path, "\n\n"))


# ---- normalization ----

def test_normalize_examples():
    x = np.array([[2.0, 5.0, 0.25], [4.0, 5.0, 0.0], [6.0, 5.0, 1.0]])
    ds = normalize(Dataset("t", x, np.array([0, 1, 0]), 2))
    assert ds.features[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert ds.features[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert np.max(np.abs(ds.features[:, 2] - x[:, 2])) <= 1e-15
    assert ds.feature_ranges.tolist() == [[2, 6], [5, 5], [0, 1]]


def test_apply_ranges_clips_out_of_range():
    assert apply_ranges(np.array([[-1.0], [3.0]]), np.array([[0.0, 2.0]])).tolist() == [[0.0], [1.0]]


# ---- folds ----

def test_folds_exact_divisibility():
    y = np.array([0, 0, 0, 1, 1, 1])
    f = stratified_folds(y, 3, seed=1)
    for k in range(3):
        assert sorted(y[f == k]) == [0, 1]


def test_folds_deterministic():
    y = np.repeat([0, 1, 2], 9)
    assert np.array_equal(stratified_folds(y, 4, 7), stratified_folds(y, 4, 7))


def test_folds_uneven_classes():
    y = np.array([0] * 7 + [1] * 5)
    f = stratified_folds(y, 4, seed=3)
    for c in (0, 1):
        sizes = np.bincount(f[y == c], minlength=4)
        assert sizes.max() - sizes.min() <= 1
    sizes = np.bincount(f, minlength=4)
    assert sizes.max() - sizes.min() <= 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 12), min_size=1, max_size=5), st.integers(2, 6), st.integers(0, 2**31))
def test_folds_class_proportions(counts, k, seed):
    y = np.repeat(np.arange(len(counts)), counts)
    if k > len(y):
        return
    f = stratified_folds(y, k, seed)
    assert set(f) <= set(range(k))
    for c, n in enumerate(counts):
        per_fold = np.bincount(f[y == c], minlength=k)
        assert np.all(np.abs(per_fold - n / k) < 1.0)


def test_folds_reject_too_many():
    with pytest.raises(ValueError):
        stratified_folds(np.array([0, 1]), 3, 0)


def test_holdout_keeps_training_sample_per_class():
    y = np.array([0, 1, 1, 1, 1, 1])
    val = stratified_holdout(y, 0.2, 0)
    assert not val[0] and val[1:].sum() == 1


# ---- fit_model ----

def test_zero_iterations_equal_centroid():
    ds = normalize(blobs())
    hy = Hyper(n=100, kappa=3, beta=3.0, p=1)
    opts = FitOptions(budget=0, init_noise=False)
    glvq = fit_model("intrvfl-glvq", hy, ds.features, ds.labels, ds.l, 5, 9, opts)
    cent = fit_model("intrvfl-centroid", hy, ds.features, ds.labels, ds.l, 5, 9, opts)
    probe = np.random.default_rng(2).uniform(size=(200, ds.k))
    assert np.array_equal(glvq.predict(probe), cent.predict(probe))
    assert np.array_equal(glvq.readout.prototypes, cent.readout.prototypes)


def test_intrvfl_rls_matches_manual_readout():
    ds = normalize(blobs())
    hy = Hyper(n=80, kappa=2, lam=0.25)
    pipe = fit_model("intrvfl-rls", hy, ds.features, ds.labels, ds.l, 11)
    h = HiddenLayer("intrvfl", ds.k, 80, 2, 11)(ds.features)
    manual = rls_fit(h, one_hot(ds.labels, ds.l), 0.25)
    assert np.array_equal(pipe.readout.w_out, manual.w_out)


@pytest.mark.parametrize("kind", ["intrvfl-glvq", "rvfl-rls", "glvq-raw", "intrvfl-perceptron"])
def test_fit_model_seed_determinism(kind):
    ds = normalize(blobs())
    hy = Hyper(n=60, kappa=3, lam=0.5, beta=2.0, p=2)
    opts = FitOptions(budget=20)
    a = fit_model(kind, hy, ds.features, ds.labels, ds.l, 3, 4, opts).to_dict()
    b = fit_model(kind, hy, ds.features, ds.labels, ds.l, 3, 4, opts).to_dict()
    assert json.dumps(a) == json.dumps(b)


def test_different_encoder_seeds_give_different_keys():
    a = HiddenLayer("intrvfl", 4, 64, 3, 1)
    b = HiddenLayer("intrvfl", 4, 64, 3, 2)
    assert not np.array_equal(a.spec.w_in, b.spec.w_in)


def test_fit_model_rejects_missing_class():
    ds = blobs()
    with pytest.raises(ValueError, match="class 2 missing"):
        fit_model("intrvfl-rls", Hyper(n=20, kappa=1, lam=1.0), ds.features[:30], ds.labels[:30], 3, 0)


def test_pipeline_roundtrip():
    ds = normalize(blobs())
    for kind in ("intrvfl-glvq", "rvfl-rls", "rls-raw"):
        pipe = fit_model(kind, Hyper(n=40, kappa=3, lam=0.5, beta=2.0, p=2), ds.features, ds.labels, ds.l, 1, 2,
                         FitOptions(budget=5))
        pipe.feature_ranges = ds.feature_ranges
        back = Pipeline.from_dict(json.loads(json.dumps(pipe.to_dict())))
        assert np.array_equal(back.predict(ds.features), pipe.predict(ds.features))


# ---- grid search ----

def test_grid_order_and_used_axes():
    cfg = small_cfg(n_grid=[100, 50], kappa_grid=[1, 3], lambda_grid=[1.0])
    pts = list(grid_points(cfg, "intrvfl-rls"))
    assert [(p.n, p.kappa) for p in pts] == [(50, 1), (50, 3), (100, 1), (100, 3)]
    assert all(p.beta is None and p.p is None for p in pts)
    assert [p.to_dict() for p in grid_points(cfg, "intrvfl-centroid")][0] == {"n": 50, "kappa": 1}


def test_grid_singleton():
    ds = normalize(blobs())
    res = grid_search(small_cfg(), "intrvfl-rls", ds.features, ds.labels, ds.l, (0, 1, 0, 0))
    assert res.best == Hyper(n=50, kappa=3, lam=0.5) and len(res.scores) == 1


def test_grid_argmax_picks_better_point():
    # on raw features a huge ridge penalty collapses the readout; a small one separates the blobs
    ds = normalize(blobs(spread=0.03))
    cfg = small_cfg(lambda_grid=[1e6, 1e-3])
    res = grid_search(cfg, "rls-raw", ds.features, ds.labels, ds.l, (0, 1, 0, 0))
    scores = dict((h.lam, s) for h, s in res.scores)
    assert scores[1e-3] > scores[1e6]
    assert res.best.lam == 1e-3


def test_grid_all_tie_returns_first():
    ds = normalize(blobs(spread=0.01))
    cfg = small_cfg(n_grid=[50], kappa_grid=[3], beta_grid=[3.0, 1.0, 2.0], p_grid=[1])
    res = grid_search(cfg, "intrvfl-centroid", ds.features, ds.labels, ds.l, (0, 1, 0, 0))
    assert len({s for _, s in res.scores}) == 1
    assert res.best == next(grid_points(cfg, "intrvfl-centroid"))


def test_two_phase_reuses_rls_hidden():
    ds = normalize(blobs())
    cfg = small_cfg(n_grid=[20, 60], kappa_grid=[1, 3], beta_grid=[1.0, 4.0], p_grid=[1, 2])
    keys = (0, 1, 0, 0)
    rls = grid_search(cfg, "intrvfl-rls", ds.features, ds.labels, ds.l, keys)
    glvq = grid_search(cfg, "intrvfl-glvq", ds.features, ds.labels, ds.l, keys)
    assert (glvq.best.n, glvq.best.kappa) == (rls.best.n, rls.best.kappa)
    assert len(glvq.scores) == 4


def test_derive_seed_distinct_streams():
    seeds = {derive_seed(0, 1, s, f, t) for s in range(3) for f in range(4) for t in range(5)}
    assert len(seeds) == 60


# ---- experiments ----

@pytest.fixture(scope="module")
def two_datasets():
    a = blobs(0)
    b = blobs(1, l=2, k=3)
    b.name = "blobs2"
    return [a, b]


def test_budget_propagates(two_datasets):
    cfg = small_cfg(kind="intrvfl-glvq", budget=10, beta_grid=[2.0, 8.0], p_grid=[1, 2])
    res = run_experiment(cfg, two_datasets)
    for d in res["datasets"]:
        for s in d["seeds"]:
            for f in s["folds"]:
                assert f["optimizer"]["iterations"] <= 10
                assert f["inner_max_iterations"] <= 10
                assert f["flops"]["I"] == f["optimizer"]["iterations"]


def test_result_invariants(two_datasets):
    res = run_experiment(small_cfg(kind="intrvfl-rls", seeds=2), two_datasets)
    assert res["schema"] == "intrvfl.experiment/1" and res["config"]["kind"] == "intrvfl-rls"
    for d, ds in zip(res["datasets"], two_datasets):
        assert d["status"] == "ok"
        for s in d["seeds"]:
            accs = [f["accuracy"] for f in s["folds"]]
            assert all(0.0 <= a <= 1.0 for a in accs)
            assert sum(f["n_test"] for f in s["folds"]) == ds.m
            assert abs(s["mean_accuracy"] - math.fsum(accs) / len(accs)) <= 1e-12
            for f in s["folds"]:
                fl = f["flops"]
                assert fl["T"] == f["n_train"] and fl["N"] == 50 and fl["L"] == ds.l
                assert "rls_direct" in fl and "rls_qr" in fl
        assert abs(d["mean_accuracy"] - np.mean([s["mean_accuracy"] for s in d["seeds"]])) <= 1e-12


def test_failing_dataset_recorded(two_datasets):
    bad = Dataset("tiny", np.array([[0.0], [1.0]]), np.array([0, 1]), 2)
    res = run_experiment(small_cfg(kind="intrvfl-rls"), [bad] + two_datasets)
    assert res["datasets"][0]["status"] == "error" and "folds" in res["datasets"][0]["error"]
    assert [d["status"] for d in res["datasets"][1:]] == ["ok", "ok"]


def test_worker_count_does_not_change_results(two_datasets):
    cfg1 = small_cfg(kind="intrvfl-glvq", seeds=2, beta_grid=[1.0, 5.0])
    cfg3 = small_cfg(kind="intrvfl-glvq", seeds=2, beta_grid=[1.0, 5.0], threads=3)
    a = json.dumps(strip_volatile(run_experiment(cfg1, two_datasets)), sort_keys=True)
    b = json.dumps(strip_volatile(run_experiment(cfg3, two_datasets)), sort_keys=True)
    assert a == b


@pytest.mark.parametrize("kind", ["intrvfl-glvq", "intrvfl-rls", "rvfl-glvq"])
def test_no_test_leakage(kind):
    ds = normalize(blobs(3))
    folds = stratified_folds(ds.labels, 3, 0)
    cfg = small_cfg(kind=kind, beta_grid=[1.0, 3.0], p_grid=[1, 2], lambda_grid=[0.1, 1.0])
    pipe, grid = fit_fold(cfg, ds, 0, 1, folds)
    sentinel = np.flatnonzero(folds == 1)[0]
    x2 = ds.features.copy()
    x2[sentinel] = 0.5 + 0.1 * np.sin(np.arange(ds.k))
    y2 = ds.labels.copy()
    y2[sentinel] = (y2[sentinel] + 1) % ds.l
    ds2 = Dataset(ds.name, x2, y2, ds.l, ds.label_names, ds.feature_ranges)
    pipe2, grid2 = fit_fold(cfg, ds2, 0, 1, folds)
    assert json.dumps(pipe.to_dict()) == json.dumps(pipe2.to_dict())
    assert grid.to_dict() == grid2.to_dict()


# ---- comparison ----

def result(kind, accs):
    return {"config": {"kind": kind},
            "datasets": [{"name": f"d{i}", "status": "ok", "mean_accuracy": a} for i, a in enumerate(accs)]}


def test_compare_self():
    r = result("a", [0.7, 0.8, 0.95])
    s = compare_report(r, r)
    assert s["pearson_r"] == pytest.approx(1.0) and s["mean_difference"] == 0.0
    assert s["paired_t_p_value"] == 1.0 and not s["t_test_defined"]


def test_compare_perfect_linearity():
    s = compare_report(result("a", [0, 1, 2]), result("b", [0, 2, 4]))
    assert s["pearson_r"] == pytest.approx(1.0, abs=1e-15)


def test_compare_pearson_matches_two_pass():
    a = [0.61, 0.72, 0.55, 0.93, 0.81, 0.77]
    b = [0.66, 0.70, 0.59, 0.91, 0.86, 0.74]
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    cov = sum((u - ma) * (v - mb) for u, v in zip(a, b))
    r = cov / math.sqrt(sum((u - ma) ** 2 for u in a) * sum((v - mb) ** 2 for v in b))
    s = compare_report(result("a", a), result("b", b))
    assert abs(s["pearson_r"] - r) <= 1e-12
    assert s["t_test_defined"] and 0.0 < s["paired_t_p_value"] < 1.0
    assert pairs_csv(s).splitlines()[0] == "dataset,a,b" and len(pairs_csv(s).splitlines()) == 7


def test_compare_rejects_mismatch():
    with pytest.raises(ValueError, match="dataset lists differ"):
        compare_report(result("a", [0.5, 0.6]), result("b", [0.5]))


# ---- CLI ----

@pytest.fixture
def iris_like(tmp_path):
    ds = blobs(4)
    rows = [",".join(repr(float(v)) for v in x) + f",c{y}" for x, y in zip(ds.features, ds.labels)]
    return write(tmp_path, "\n".join(rows) + "\n", "blobs.csv")


GRID = ["--n-grid", "30", "--kappa-grid", "1,3", "--lambda-grid", "2^-2,2^0", "--beta-grid", "2",
        "--p-grid", "1", "--budget", "5", "--seeds", "1", "--folds", "3"]


def test_cli_fit_then_eval(tmp_path, iris_like, capsys):
    model = tmp_path / "m.json"
    assert cli.main(["fit", "--dataset", str(iris_like), "--model", "intrvfl-rls", "--out", str(model)] + GRID) == 0
    assert cli.main(["eval", str(model), "--dataset", str(iris_like)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["m"] == 45 and out["accuracy"] > 0.9 and Counter(out["predictions"]).keys() <= {"c0", "c1", "c2"}


def test_cli_grid_bench_compare(tmp_path, iris_like):
    assert cli.main(["grid", "--dataset", str(iris_like), "--model", "intrvfl-glvq",
                     "--out", str(tmp_path / "g.json")] + GRID) == 0
    assert json.loads((tmp_path / "g.json").read_text())["best"]["beta"] == 2.0
    for kind in ("intrvfl-rls", "rvfl-rls"):
        assert cli.main(["bench", "--dataset-dir", str(tmp_path), "--model", kind,
                         "--out", str(tmp_path / "out" / f"{kind}.json")] + GRID) == 0
    assert cli.main(["compare", str(tmp_path / "out" / "intrvfl-rls.json"), str(tmp_path / "out" / "rvfl-rls.json"),
                     "--out", str(tmp_path / "cmp.json")]) == 0
    assert (tmp_path / "cmp.csv").read_text().startswith("dataset,a,b\nblobs,")


def test_cli_cost(capsys):
    assert cli.main(["cost", "--t", "1", "--n", "1", "--l", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["rls_direct"] == pytest.approx(17 / 3)


def test_cli_usage_errors(capsys):
    assert cli.main(["cost", "--t", "0", "--n", "1", "--l", "1"]) == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["bench", "--folds"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["fit", "--dataset", "x.csv", "--beta-grid", "a,b"])
    assert e.value.code == 1
    assert cli.main(["bench"]) == 1


def test_cli_data_errors(tmp_path):
    assert cli.main(["fit", "--dataset", str(tmp_path / "missing.csv")]) == 2
    bad = write(tmp_path, "1,2,a\n1,2\n", "bad.csv")
    assert cli.main(["fit", "--dataset", str(bad)]) == 2
    assert cli.main(["eval", str(bad), "--dataset", str(bad)]) == 2


def test_cli_numerical_failure(iris_like):
    assert cli.main(["fit", "--dataset", str(iris_like), "--model", "rls-raw", "--lambda-grid", "0",
                     "--seeds", "1"]) in (0, 3)
    dup = iris_like.parent / "dup.csv"
    dup.write_text("0.5,0.5,a\n0.5,0.5,b\n0.5,0.5,a\n0.5,0.5,b\n0.5,0.5,a\n0.5,0.5,b\n")
    assert cli.main(["fit", "--dataset", str(dup), "--model", "rls-raw", "--lambda-grid", "0"]) == 3


def test_parse_grid_forms():
    assert cli.parse_grid("1:4", int) == [1, 2, 3, 4]
    assert cli.parse_grid("2^-1,2^1") == [0.5, 2.0]
