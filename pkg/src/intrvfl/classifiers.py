"""Readout classifiers over hidden activations.

Prototype readouts (nearest centroid, perceptron-refined centroids, GLVQ) and
the ridge (RLS) linear readout.  Class labels are 0-based integers; prototype
``k`` belongs to class ``k // p`` (class-major layout).  Every argmin/argmax
breaks ties toward the lowest index.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import linalg
from .optim import BUDGET, OptimizeReport, gd_minimize, lbfgs_minimize

log = logging.getLogger(__name__)


class DegenerateSampleError(ArithmeticError):
    """Sample coincides with its nearest correct and nearest wrong prototype."""


@dataclass
class PrototypeModel:
    prototypes: np.ndarray  # (l * p, n)
    l: int
    p: int
    beta: float = 1.0
    class_of: np.ndarray = field(init=False)

    def __post_init__(self):
        self.prototypes = np.array(self.prototypes, dtype=np.float64)
        if self.prototypes.ndim != 2 or self.prototypes.shape[0] != self.l * self.p:
            raise ValueError(f"expected {self.l * self.p} prototypes, got array of shape {self.prototypes.shape}")
        if not np.all(np.isfinite(self.prototypes)):
            raise ValueError("prototype entries must be finite")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        self.class_of = np.repeat(np.arange(self.l), self.p)

    @property
    def n(self):
        return self.prototypes.shape[1]

    def with_prototypes(self, prototypes):
        return PrototypeModel(np.asarray(prototypes).reshape(self.prototypes.shape), self.l, self.p, self.beta)

    def to_dict(self):
        return {"kind": "prototypes", "l": self.l, "p": self.p, "beta": self.beta,
                "class_of": self.class_of.tolist(), "prototypes": self.prototypes.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["prototypes"], dtype=np.float64), int(d["l"]), int(d["p"]), float(d["beta"]))


@dataclass
class LinearReadout:
    w_out: np.ndarray  # (l, n)
    lam: float

    def to_dict(self):
        return {"kind": "linear", "lambda": self.lam, "w_out": self.w_out.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["w_out"], dtype=np.float64), float(d["lambda"]))


def sq_euclidean(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff)


def sq_distances(h, w, chunk=256):
    """Exact squared distances between rows of ``h`` (M, N) and ``w`` (K, N)."""
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    out = np.empty((h.shape[0], w.shape[0]))
    for s in range(0, h.shape[0], chunk):
        diff = h[s:s + chunk, None, :] - w[None, :, :]
        out[s:s + chunk] = np.einsum("mkn,mkn->mk", diff, diff)
    return out


def predict_nearest(model, h):
    """Class of the nearest prototype and all prototype distances.

    Accepts one vector (returns ``(int, (l*p,) array)``) or a batch (returns
    ``((m,) array, (m, l*p) array)``).
    """
    single = np.ndim(h) == 1
    if np.shape(h)[-1] != model.n:
        raise ValueError(f"activation length {np.shape(h)[-1]} != prototype length {model.n}")
    d = sq_distances(h, model.prototypes)
    cls = model.class_of[np.argmin(d, axis=1)]
    return (int(cls[0]), d[0]) if single else (cls, d)


def check_labels(y, l):
    y = np.asarray(y)
    missing = np.setdiff1d(np.arange(l), y)
    if missing.size:
        raise ValueError(f"class {int(missing[0])} has no samples")
    if y.min() < 0 or y.max() >= l:
        raise ValueError(f"labels must lie in [0, {l})")
    return y.astype(np.int64)


def class_centroids(x, y, l):
    x = np.asarray(x, dtype=np.float64)
    y = check_labels(y, l)
    sums = np.zeros((l, x.shape[1]))
    np.add.at(sums, y, x)
    return sums / np.bincount(y, minlength=l)[:, None]


def centroid_fit(x, y, l, beta=1.0):
    return PrototypeModel(class_centroids(x, y, l), l, 1, beta)


def init_prototypes(x, y, l, p, beta=1.0, noise=True, rng=None):
    """Every class's ``p`` prototypes start at its centroid, plus U(-1, 1) noise."""
    protos = np.repeat(class_centroids(x, y, l), p, axis=0)
    if noise:
        protos = protos + rng.uniform(-1.0, 1.0, size=protos.shape)
    return PrototypeModel(protos, l, p, beta)


def perceptron_refine(model, x, y, alpha, iters):
    """Perceptron passes over the samples in order: on each mistake the true
    class prototype gets ``+alpha*x`` and the predicted one ``-alpha*x``."""
    if model.p != 1:
        raise ValueError("perceptron refinement needs one prototype per class")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    x = np.asarray(x, dtype=np.float64)
    w = model.prototypes.copy()
    for _ in range(iters):
        mistakes = 0
        for xi, yi in zip(x, y):
            diff = w - xi
            pred = int(np.argmin(np.einsum("kn,kn->k", diff, diff)))
            if pred != yi:
                w[yi] += alpha * xi
                w[pred] -= alpha * xi
                mistakes += 1
        if mistakes == 0:
            break
    return model.with_prototypes(w)


def glvq_mu(h, model, true_class):
    """Relative distance difference ``(d+ - d-) / (d+ + d-)`` for one sample.

    Returns ``(mu, idx_plus, idx_minus)``.
    """
    d = sq_distances(h, model.prototypes)[0]
    same = model.class_of == true_class
    if same.all() or not same.any():
        raise ValueError("model needs prototypes of the true class and of another class")
    ip = int(np.argmin(np.where(same, d, np.inf)))
    im = int(np.argmin(np.where(same, np.inf, d)))
    s = d[ip] + d[im]
    if s == 0.0:
        raise DegenerateSampleError("sample coincides with prototypes of two classes")
    return (d[ip] - d[im]) / s, ip, im


class GLVQObjective:
    """Sigmoid GLVQ cost over a fixed batch, as a function of the flattened
    prototype matrix.  ``value`` and ``grad`` share one cached evaluation."""

    def __init__(self, x, y, l, p, beta, skip_degenerate=False):
        self.x = np.asarray(x, dtype=np.float64)
        self.xx = (self.x * self.x).sum(1)
        self.y = np.asarray(y, dtype=np.int64)
        self.shape = (l * p, self.x.shape[1])
        self.beta = float(beta)
        self.same = np.repeat(np.arange(l), p)[None, :] == self.y[:, None]
        self.skip_degenerate = skip_degenerate
        self.n_skipped = 0
        self._key = None

    def _evaluate(self, flat):
        w = flat.reshape(self.shape)
        x = self.x
        ww = (w * w).sum(1)
        d = np.maximum(self.xx[:, None] - 2.0 * (x @ w.T) + ww[None, :], 0.0)
        rows = np.arange(x.shape[0])
        ip = np.argmin(np.where(self.same, d, np.inf), axis=1)
        im = np.argmin(np.where(self.same, np.inf, d), axis=1)
        dp, dm = d[rows, ip], d[rows, im]
        # the expansion loses digits when a sample sits on a prototype
        close = dp + dm <= 1e-8 * (self.xx + ww[ip] + ww[im])
        if close.any():
            for r in np.flatnonzero(close):
                dp[r] = np.sum((x[r] - w[ip[r]]) ** 2)
                dm[r] = np.sum((x[r] - w[im[r]]) ** 2)
        s = dp + dm
        ok = s > 0
        if not ok.all():
            if not self.skip_degenerate:
                raise DegenerateSampleError(
                    f"sample {int(np.flatnonzero(~ok)[0])} coincides with prototypes of two classes")
            self.n_skipped = int((~ok).sum())
            log.warning("skipping %d degenerate sample(s) in GLVQ gradient", self.n_skipped)
        s_safe = np.where(ok, s, 1.0)
        mu = (dp - dm) / s_safe
        g = expit(self.beta * mu)
        value = float(np.sum(g[ok]))
        dg = np.where(ok, self.beta * g * (1.0 - g), 0.0)
        c = np.zeros((x.shape[0], self.shape[0]))
        c[rows, ip] = -dg * 4.0 * dm / s_safe**2
        c[rows, im] = dg * 4.0 * dp / s_safe**2
        grad = c.T @ x - c.sum(0)[:, None] * w
        return value, grad.ravel()

    def __call__(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        key = flat.tobytes()
        if key != self._key:
            self._cached = self._evaluate(flat)
            self._key = key
        return self._cached

    def value(self, flat):
        return self(flat)[0]

    def grad(self, flat):
        return self(flat)[1]


def glvq_cost(model, x, y):
    return GLVQObjective(x, y, model.l, model.p, model.beta).value(model.prototypes.ravel())


def glvq_gradient(model, x, y):
    return GLVQObjective(x, y, model.l, model.p, model.beta).grad(model.prototypes.ravel())


@dataclass
class FitReport:
    optimizer: str
    initial_cost: float
    skipped_samples: int
    result: OptimizeReport

    def to_dict(self):
        return {"optimizer": self.optimizer, "initial_cost": self.initial_cost,
                "skipped_samples": self.skipped_samples, **self.result.to_dict()}


def glvq_fit(x, y, init, budget=2500, optimizer="lbfgs", m=10, gtol=1e-5, ftol=2.22e-9, step=0.01):
    """Minimize the GLVQ cost from ``init``; returns ``(model, FitReport)``.

    ``optimizer`` is ``"lbfgs"`` (memory ``m``) or ``"gd"`` (fixed ``step``,
    the learning rate).  Degenerate samples are skipped with a warning.
    """
    y = check_labels(y, init.l)
    obj = GLVQObjective(x, y, init.l, init.p, init.beta, skip_degenerate=True)
    w0 = init.prototypes.ravel()
    f0 = obj.value(w0)
    if budget == 0:
        rep = OptimizeReport(0, f0, float(np.max(np.abs(obj.grad(w0)))), False, BUDGET, 1)
        return init, FitReport(optimizer, f0, obj.n_skipped, rep)
    if optimizer == "lbfgs":
        w, rep = lbfgs_minimize(obj.value, obj.grad, w0, m=m, budget=budget, gtol=gtol, ftol=ftol)
    elif optimizer == "gd":
        w, rep = gd_minimize(obj.value, obj.grad, w0, step=step, budget=budget, gtol=gtol)
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    return init.with_prototypes(w), FitReport(optimizer, f0, obj.n_skipped, rep)


def one_hot(y, l):
    out = np.zeros((len(y), l))
    out[np.arange(len(y)), y] = 1.0
    return out


def rls_fit(h, y_onehot, lam, path="qr"):
    """Ridge readout ``W_out^T = (H^T H + lam I)^-1 H^T Y``.

    ``path="qr"`` factors the regularized Gram matrix and back-substitutes;
    ``path="direct"`` forms the explicit inverse.
    """
    h = linalg.as_matrix(h, "H")
    yy = linalg.as_matrix(y_onehot, "Y")
    if h.shape[0] != yy.shape[0]:
        raise linalg.ShapeError(f"H has {h.shape[0]} rows but Y has {yy.shape[0]}")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    a = h.T @ h + lam * np.eye(h.shape[1])
    z = h.T @ yy
    try:
        if path == "qr":
            q, r = linalg.qr_factor(a)
            w_t = linalg.solve_upper_triangular(r, q.T @ z)
        elif path == "direct":
            inv = np.linalg.inv(a)
            if not np.all(np.isfinite(inv)):
                raise np.linalg.LinAlgError("non-finite inverse")
            w_t = inv @ z
        else:
            raise ValueError(f"unknown path {path!r}")
    except (linalg.SingularMatrixError, np.linalg.LinAlgError) as e:
        raise linalg.SingularMatrixError(f"regularized Gram matrix is singular ({e}); use lambda > 0") from e
    return LinearReadout(w_t.T.copy(), float(lam))


def rls_path(h, y_onehot, lambdas):
    """Ridge readouts for several ``lam`` from one thin SVD of ``H``.

    Same solutions as :func:`rls_fit`, cheaper when scanning a lambda grid.
    """
    u, s, vt = np.linalg.svd(np.asarray(h, dtype=np.float64), full_matrices=False)
    uty = u.T @ y_onehot
    out = []
    for lam in lambdas:
        with np.errstate(divide="ignore", invalid="ignore"):
            filt = np.where(s > 0, s / (s * s + lam), 0.0)
        out.append(LinearReadout((vt.T @ (filt[:, None] * uty)).T, float(lam)))
    return out


def rls_predict(readout, h):
    """``(class, scores)`` for one vector, ``(classes, scores)`` for a batch."""
    single = np.ndim(h) == 1
    if np.shape(h)[-1] != readout.w_out.shape[1]:
        raise ValueError(f"activation length {np.shape(h)[-1]} != readout width {readout.w_out.shape[1]}")
    scores = np.atleast_2d(np.asarray(h, dtype=np.float64)) @ readout.w_out.T
    cls = np.argmax(scores, axis=1)
    return (int(cls[0]), scores[0]) if single else (cls, scores)
