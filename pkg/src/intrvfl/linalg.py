"""Dense real-matrix kernel used by the ridge readout.

Matrices are plain 2-D float64 numpy arrays (row-major).  The functions here
validate shapes/finiteness and raise :class:`ShapeError` or
:class:`SingularMatrixError`; the heavy lifting is LAPACK via numpy/scipy.
"""
import numpy as np
from scipy.linalg import solve_triangular

SINGULAR_RTOL = 1e-12


class ShapeError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


def as_matrix(a, name="matrix"):
    """Coerce to a finite 2-D float64 array (copying only when needed)."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def qr_factor(a):
    """Householder QR of a square matrix: returns (q, r) with q @ r == a."""
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"qr_factor needs a square matrix, got {a.shape[0]}x{a.shape[1]}")
    q, r = np.linalg.qr(a, mode="complete")
    return q, np.triu(r)


def householder_qr(a):
    """Reference Householder QR written out column by column.

    Slow (python loop over columns); used to cross-check :func:`qr_factor`.
    """
    r = as_matrix(a, "a").copy()
    n_rows, n_cols = r.shape
    q = np.eye(n_rows)
    for k in range(min(n_rows - 1, n_cols)):
        x = r[k:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        r[k:, :] -= 2.0 * np.outer(v, v @ r[k:, :])
        q[:, k:] -= 2.0 * np.outer(q[:, k:] @ v, v)
    return q, np.triu(r)


def solve_upper_triangular(r, b):
    """Back substitution for ``r @ x = b`` with r upper-triangular."""
    r = as_matrix(r, "r")
    b_arr = np.asarray(b, dtype=np.float64)
    vector_rhs = b_arr.ndim == 1
    b = as_matrix(b_arr, "b")
    n = r.shape[0]
    if r.shape != (n, n):
        raise ShapeError(f"r must be square, got {r.shape}")
    if b.shape[0] != n:
        raise ShapeError(f"rhs has {b.shape[0]} rows, r is {n}x{n}")
    diag = np.abs(np.diag(r))
    scale = np.max(np.abs(r)) if r.size else 0.0
    bad = np.flatnonzero(diag < SINGULAR_RTOL * scale) if scale > 0 else np.arange(n)
    if bad.size:
        raise SingularMatrixError(f"singular triangular factor: zero pivot at index {bad[0]}", pivot=int(bad[0]))
    x = solve_triangular(r, b, lower=False, check_finite=False)
    return x[:, 0] if vector_rhs else x
