"""Hidden-layer encoders.

``intRVFL``: every normalized feature is quantized into a bipolar thermometer
code of length N, bound (elementwise product) with that feature's fixed random
bipolar key from ``w_in``, the K bound vectors are bundled (summed) and the sum
is clipped to ``[-kappa, kappa]``.  Activations are therefore small integers.

The conventional RVFL stand-in is a logistic layer over a uniform random
affine projection.
"""
import json
from dataclasses import dataclass, field

import numpy as np


def _check_unit_interval(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("inputs must lie in [0, 1]; normalize features first")
    return x


def quantize(x, n):
    """Thermometer level ``v = round_half_up(x * n)`` clamped to ``[0, n]``."""
    x = _check_unit_interval(x)
    return np.clip(np.floor(x * n + 0.5), 0, n).astype(np.int64)


def thermometer(x, n):
    """Bipolar thermometer code: first ``v`` entries +1, the rest -1."""
    v = int(quantize(x, n))
    code = -np.ones(n, dtype=np.int8)
    code[:v] = 1
    return code


def gen_input_weights(k, n, seed):
    if k < 1 or n < 1:
        raise ValueError(f"k and n must be positive, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    return (2 * rng.integers(0, 2, size=(k, n), dtype=np.int8) - 1).astype(np.int8)


@dataclass(frozen=True)
class EncoderSpec:
    k: int
    n: int
    kappa: int
    seed: int
    w_in: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k < 1 or self.n < 1 or self.kappa < 1:
            raise ValueError(f"k, n, kappa must be >= 1 (got {self.k}, {self.n}, {self.kappa})")
        w = gen_input_weights(self.k, self.n, self.seed)
        w.flags.writeable = False
        object.__setattr__(self, "w_in", w)

    def to_dict(self):
        return {"k": self.k, "n": self.n, "kappa": self.kappa, "seed": self.seed}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(k=int(d["k"]), n=int(d["n"]), kappa=int(d["kappa"]), seed=int(d["seed"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def bundle_bound_codes(x, w_in):
    """Unclipped sum of thermometer codes bound with ``w_in`` rows.

    ``x`` is (M, K) or (K,); returns int32 (M, N) or (N,).
    """
    w_in = np.asarray(w_in)
    x = _check_unit_interval(x)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    k, n = w_in.shape
    if x2.shape[1] != k:
        raise ValueError(f"sample has {x2.shape[1]} features, encoder expects {k}")
    levels = quantize(x2, n)
    positions = np.arange(n)
    w = w_in.astype(np.int32)
    total = np.zeros((x2.shape[0], n), dtype=np.int32)
    for i in range(k):
        total += np.where(positions[None, :] < levels[:, i, None], w[i], -w[i])
    return total[0] if single else total


def clip_activations(raw, kappa):
    return np.clip(raw, -kappa, kappa)


def encode_intrvfl(x, spec):
    return clip_activations(bundle_bound_codes(x, spec.w_in), spec.kappa)


def gen_conventional_weights(k, n, seed):
    """Uniform [-1, 1] projection weights (K, N) and biases (N,)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(k, n)), rng.uniform(-1.0, 1.0, size=n)


def encode_conventional(x, w, b):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ValueError(f"shape mismatch: x {x.shape}, w {w.shape}, b {b.shape}")
    z = x @ w + b
    # exp(-z) overflows for z << 0; the logistic saturates to 0 there anyway
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))
