"""Dataset ingestion, min-max normalization and stratified splitting."""
import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    name: str
    features: np.ndarray  # (m, k) float64
    labels: np.ndarray  # (m,) int, 0-based class index
    l: int
    label_names: list = field(default_factory=list)
    feature_ranges: np.ndarray = None  # (k, 2) min/max used by normalize()

    @property
    def m(self):
        return self.features.shape[0]

    @property
    def k(self):
        return self.features.shape[1]


def load_dataset(path, label_position="last", header=False, name=None):
    """Read a comma-separated file, one sample per row.

    Labels (integer or string) are mapped to 0-based indices in order of first
    appearance.  Raises :class:`DataError` with the offending line/column.
    """
    path = Path(path)
    if label_position not in ("last", "first"):
        raise ValueError("label_position must be 'last' or 'first'")
    with open(path, newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no samples")
    width = len(rows[0][1])
    if width < 2:
        raise DataError(f"{path}: need at least one feature and a label per row")
    feats, raw_labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: ragged row with {len(row)} fields, expected {width}")
        label, values = (row[-1], row[:-1]) if label_position == "last" else (row[0], row[1:])
        off = 1 if label_position == "first" else 0
        try:
            feats.append([float(v) for v in values])
        except ValueError:
            col = next(j for j, v in enumerate(values) if not _is_float(v))
            raise DataError(f"{path}:{lineno}: non-numeric feature {values[col]!r} in column {col + off + 1}") from None
        raw_labels.append(label.strip())
    x = np.array(feats, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError(f"{path}: non-finite feature values")
    names = list(dict.fromkeys(raw_labels))
    index = {n: i for i, n in enumerate(names)}
    y = np.array([index[v] for v in raw_labels], dtype=np.int64)
    return Dataset(name or path.stem, x, y, len(names), names)


def _is_float(v):
    try:
        float(v)
        return True
    except ValueError:
        return False


def normalize(ds):
    """Min-max scale every feature to [0, 1] over the whole dataset.

    Constant features map to 0.  The ranges are kept in ``feature_ranges``.
    """
    lo, hi = ds.features.min(0), ds.features.max(0)
    return replace(ds, features=apply_ranges(ds.features, np.column_stack([lo, hi])),
                   feature_ranges=np.column_stack([lo, hi]))


def apply_ranges(x, ranges):
    """Scale with stored (min, max) ranges; values outside the range are clipped."""
    lo, hi = ranges[:, 0], ranges[:, 1]
    span = hi - lo
    out = np.where(span > 0, (x - lo) / np.where(span > 0, span, 1.0), 0.0)
    return np.clip(out, 0.0, 1.0)


def stratified_folds(y, k, seed):
    """Fold index per sample.

    Each class is shuffled (seeded) and dealt round-robin; the dealing position
    carries over between classes so fold sizes stay balanced too.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > len(y):
        raise ValueError(f"{k} folds requested for {len(y)} samples")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=np.int64)
    start = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            log.warning("class %s has %d samples, fewer than %d folds", c, len(idx), k)
        idx = rng.permutation(idx)
        folds[idx] = (start + np.arange(len(idx))) % k
        start = (start + len(idx)) % k
    return folds


def stratified_holdout(y, fraction, seed):
    """Boolean mask of a stratified validation subset (about ``fraction`` of
    each class, always leaving at least one training sample per class)."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    val = np.zeros(len(y), dtype=bool)
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        n_val = min(int(np.floor(fraction * len(idx) + 0.5)), len(idx) - 1)
        val[idx[:n_val]] = True
    return val
