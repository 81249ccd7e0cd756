"""Model kinds: a hidden layer (none / RVFL / intRVFL) plus a readout."""
from dataclasses import asdict, dataclass, field

import numpy as np

from ..classifiers import (
    LinearReadout,
    PrototypeModel,
    centroid_fit,
    glvq_fit,
    init_prototypes,
    one_hot,
    perceptron_refine,
    predict_nearest,
    rls_fit,
    rls_predict,
)
from ..encoder import EncoderSpec, bundle_bound_codes, clip_activations, encode_conventional, gen_conventional_weights
from .data import apply_ranges

KINDS = {
    "rls-raw": ("raw", "rls"),
    "glvq-raw": ("raw", "glvq"),
    "rvfl-rls": ("rvfl", "rls"),
    "rvfl-glvq": ("rvfl", "glvq"),
    "intrvfl-rls": ("intrvfl", "rls"),
    "intrvfl-glvq": ("intrvfl", "glvq"),
    "intrvfl-centroid": ("intrvfl", "centroid"),
    "intrvfl-perceptron": ("intrvfl", "perceptron"),
}

# hyperparameters each part actually uses
HIDDEN_PARAMS = {"raw": (), "rvfl": ("n",), "intrvfl": ("n", "kappa")}
READOUT_PARAMS = {"rls": ("lam",), "glvq": ("beta", "p"), "centroid": (), "perceptron": ()}


def split_kind(kind):
    try:
        return KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(KINDS)}") from None


@dataclass(frozen=True)
class Hyper:
    n: int = None
    kappa: int = None
    lam: float = None
    beta: float = None
    p: int = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class FitOptions:
    budget: int = 2500
    optimizer: str = "lbfgs"
    init_noise: bool = True
    lbfgs_m: int = 10
    gtol: float = 1e-5
    ftol: float = 2.22e-9
    gd_step: float = 0.01
    perceptron_alpha: float = 0.05
    perceptron_iters: int = 10


class HiddenLayer:
    """Maps normalized features (m, k) to activations (m, n)."""

    def __init__(self, family, k, n=None, kappa=None, seed=None):
        self.family, self.k, self.seed = family, k, seed
        self.n = k if family == "raw" else n
        self.kappa = kappa
        if family == "intrvfl":
            self.spec = EncoderSpec(k=k, n=n, kappa=kappa, seed=seed)
        elif family == "rvfl":
            self.w, self.b = gen_conventional_weights(k, n, seed)
        elif family != "raw":
            raise ValueError(f"unknown hidden layer {family!r}")

    def raw(self, x):
        """Pre-nonlinearity activations for intRVFL (unclipped sums), final otherwise."""
        if self.family == "intrvfl":
            return bundle_bound_codes(x, self.spec.w_in)
        if self.family == "rvfl":
            return encode_conventional(x, self.w, self.b)
        return np.asarray(x, dtype=np.float64)

    def finish(self, raw, kappa=None):
        if self.family == "intrvfl":
            return clip_activations(raw, self.kappa if kappa is None else kappa).astype(np.float64)
        return raw

    def __call__(self, x):
        return self.finish(self.raw(x))

    def to_dict(self):
        d = {"family": self.family, "k": self.k, "n": self.n}
        if self.family != "raw":
            d["seed"] = self.seed
        if self.family == "intrvfl":
            d["encoder"] = self.spec.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        kappa = d.get("encoder", {}).get("kappa")
        return cls(d["family"], d["k"], d.get("n"), kappa, d.get("seed"))


def fit_readout(readout, h, y, l, hyper, opts, rng):
    """Train one readout on activations ``h``; returns ``(model, fit_report_or_None)``."""
    if readout == "rls":
        return rls_fit(h, one_hot(y, l), hyper.lam, path="qr"), None
    if readout == "glvq":
        init = init_prototypes(h, y, l, hyper.p, beta=hyper.beta, noise=opts.init_noise, rng=rng)
        return glvq_fit(h, y, init, budget=opts.budget, optimizer=opts.optimizer, m=opts.lbfgs_m,
                        gtol=opts.gtol, ftol=opts.ftol, step=opts.gd_step)
    if readout == "centroid":
        return centroid_fit(h, y, l), None
    if readout == "perceptron":
        return perceptron_refine(centroid_fit(h, y, l), h, y, opts.perceptron_alpha, opts.perceptron_iters), None
    raise ValueError(f"unknown readout {readout!r}")


def readout_predict(model, h):
    if isinstance(model, LinearReadout):
        return rls_predict(model, h)[0]
    return predict_nearest(model, h)[0]


@dataclass
class Pipeline:
    kind: str
    hyper: Hyper
    hidden: HiddenLayer
    readout: object
    report: object = None
    feature_ranges: np.ndarray = None
    label_names: list = field(default_factory=list)

    def predict(self, x):
        """Classes for already-normalized features."""
        return readout_predict(self.readout, self.hidden(np.atleast_2d(x)))

    def predict_raw(self, x):
        """Classes for unnormalized features, scaled with the training ranges."""
        return self.predict(apply_ranges(np.atleast_2d(x), self.feature_ranges))

    def to_dict(self):
        return {
            "schema": "intrvfl.model/1",
            "kind": self.kind,
            "hyper": self.hyper.to_dict(),
            "hidden": self.hidden.to_dict(),
            "readout": self.readout.to_dict(),
            "fit_report": self.report.to_dict() if self.report is not None else None,
            "feature_ranges": None if self.feature_ranges is None else self.feature_ranges.tolist(),
            "label_names": list(self.label_names),
        }

    @classmethod
    def from_dict(cls, d):
        ro = d["readout"]
        readout = LinearReadout.from_dict(ro) if ro["kind"] == "linear" else PrototypeModel.from_dict(ro)
        ranges = None if d.get("feature_ranges") is None else np.array(d["feature_ranges"])
        return cls(d["kind"], Hyper(**d["hyper"]), HiddenLayer.from_dict(d["hidden"]), readout,
                   None, ranges, d.get("label_names", []))


def fit_model(kind, hyper, x, y, l, encoder_seed, noise_seed=None, opts=None):
    """Build the hidden layer for ``kind``, encode ``x`` and fit the readout."""
    family, readout = split_kind(kind)
    opts = opts or FitOptions()
    y = np.asarray(y)
    missing = np.setdiff1d(np.arange(l), y)
    if missing.size:
        raise ValueError(f"class {int(missing[0])} missing from the training split")
    hidden = HiddenLayer(family, np.shape(x)[1], hyper.n, hyper.kappa, encoder_seed)
    h = hidden(x)
    model, report = fit_readout(readout, h, y, l, hyper, opts, np.random.default_rng(noise_seed))
    return Pipeline(kind, hyper, hidden, model, report)
