"""Full-batch minimizers: L-BFGS (two-loop recursion + Wolfe line search) and
fixed-step gradient descent.

Both return ``(x_best, OptimizeReport)``.  ``iterations`` counts accepted steps
and never exceeds ``budget``.
"""
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg.blas import daxpy, ddot

GRADIENT_TOL = "gradient-tolerance"
VALUE_STAGNATION = "value-stagnation"
BUDGET = "budget"
LINE_SEARCH_FAILURE = "line-search-failure"
DIVERGENCE = "divergence"

DEFAULT_GTOL = 1e-5
DEFAULT_FTOL = 2.22e-9


@dataclass
class OptimizeReport:
    iterations: int
    final_value: float
    final_grad_norm: float
    converged: bool
    stop_reason: str
    n_evals: int = 0

    def to_dict(self):
        return asdict(self)


class _Counted:
    """Wraps f/grad, counting evaluations and rejecting NaN at accepted iterates."""

    def __init__(self, f, grad):
        self.f, self.grad, self.n_evals = f, grad, 0

    def __call__(self, x):
        self.n_evals += 1
        return float(self.f(x)), np.asarray(self.grad(x), dtype=np.float64)


def _check_finite(fx, gx, k):
    if not np.isfinite(fx) or not np.all(np.isfinite(gx)):
        raise FloatingPointError(f"non-finite objective or gradient at iterate {k}")


def _two_loop(g, pairs):
    # in-place BLAS updates: the vectors are long and this runs every iteration
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * ddot(s, q)
        alphas.append(a)
        daxpy(y, q, a=-a)
    s, y, _ = pairs[-1]
    q *= ddot(s, y) / ddot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * ddot(y, q)
        daxpy(s, q, a=a - b)
    return q


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through two (step, value, slope) points, or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return None
    t = b - (b - a) * (db + d2 - d1) / denom
    return t if np.isfinite(t) else None


def _interpolate(a, fa, da, b, fb, db):
    lo, hi = min(a, b), max(a, b)
    t = _cubic_min(a, fa, da, b, fb, db)
    if t is None:
        return 0.5 * (lo + hi)
    margin = 0.01 * (hi - lo)
    return min(max(t, lo + margin), hi - margin)


def _extrapolate(a, fa, da, b, fb, db):
    # both points still descend: jump past b, at most 10x
    t = _cubic_min(a, fa, da, b, fb, db)
    if t is None or t <= b:
        return 2.0 * b
    return min(max(t, 1.1 * b), 10.0 * b)


def _wolfe_search(fg, x, fx, gx, d, step, c1, c2, max_trials):
    """Strong-Wolfe line search (bracketing phase + cubic-interpolation zoom).

    Returns (step, f, g), or None when no acceptable step was found.  If the
    trial budget runs out, the best point satisfying sufficient decrease is
    returned instead.
    """
    slope0 = float(np.dot(gx, d))
    prev, f_prev, d_prev = 0.0, fx, slope0
    lo = hi = None
    best = None
    trials = 0
    # bracketing
    while trials < max_trials:
        trials += 1
        f_new, g_new = fg(x + step * d)
        slope = float(np.dot(g_new, d)) if np.all(np.isfinite(g_new)) else np.nan
        if not (np.isfinite(f_new) and np.isfinite(slope)):
            step = 0.5 * (prev + step)
            continue
        if f_new > fx + c1 * step * slope0 or (f_new >= f_prev and prev > 0):
            lo, hi = (prev, f_prev, d_prev), (step, f_new, slope)
            break
        best = (step, f_new, g_new)
        if abs(slope) <= -c2 * slope0:
            return best
        if slope >= 0:
            lo, hi = (step, f_new, slope), (prev, f_prev, d_prev)
            break
        nxt = _extrapolate(prev, f_prev, d_prev, step, f_new, slope)
        prev, f_prev, d_prev = step, f_new, slope
        step = nxt
    if lo is None:
        return best
    # zoom: lo always satisfies sufficient decrease and has the lower value
    while trials < max_trials:
        trials += 1
        if abs(hi[0] - lo[0]) <= 1e-14 * max(1.0, abs(hi[0])):
            break
        step = _interpolate(*lo, *hi)
        f_new, g_new = fg(x + step * d)
        slope = float(np.dot(g_new, d)) if np.all(np.isfinite(g_new)) else np.nan
        if not (np.isfinite(f_new) and np.isfinite(slope)) or f_new > fx + c1 * step * slope0 or f_new >= lo[1]:
            hi = (step, f_new, slope) if np.isfinite(f_new) and np.isfinite(slope) else (step, lo[1], lo[2])
            continue
        best = (step, f_new, g_new)
        if abs(slope) <= -c2 * slope0:
            return best
        if slope * (hi[0] - lo[0]) >= 0:
            hi = lo
        lo = (step, f_new, slope)
    return best


def lbfgs_minimize(f, grad, x0, m=10, budget=2500, gtol=DEFAULT_GTOL, ftol=DEFAULT_FTOL,
                   c1=1e-4, c2=0.9, max_line_search=40):
    """Minimize ``f`` with limited-memory BFGS.

    Stops on ``max|grad| <= gtol``, on relative decrease
    ``(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1) <= ftol``, on the iteration
    budget, or when the line search fails (best iterate is returned).
    """
    if m < 1 or budget < 0:
        raise ValueError("need m >= 1 and budget >= 0")
    fg = _Counted(f, grad)
    x = np.array(x0, dtype=np.float64)
    fx, gx = fg(x)
    _check_finite(fx, gx, 0)
    pairs = deque(maxlen=m)

    def report(k, reason):
        conv = reason in (GRADIENT_TOL, VALUE_STAGNATION)
        return OptimizeReport(k, fx, float(np.max(np.abs(gx), initial=0.0)), conv, reason, fg.n_evals)

    if np.max(np.abs(gx), initial=0.0) <= gtol:
        return x, report(0, GRADIENT_TOL)
    for k in range(budget):
        if pairs:
            d = -_two_loop(gx, pairs)
            step = 1.0
            if np.dot(d, gx) >= 0.0:
                pairs.clear()
        if not pairs:
            d = -gx
            step = min(1.0, 1.0 / np.linalg.norm(gx))
        found = _wolfe_search(fg, x, fx, gx, d, step, c1, c2, max_line_search)
        if found is None:
            return x, report(k, LINE_SEARCH_FAILURE)
        step, f_new, g_new = found
        _check_finite(f_new, g_new, k + 1)
        s, y = step * d, g_new - gx
        sy = float(np.dot(s, y))
        if sy > 1e-10 * float(np.dot(y, y)):
            pairs.append((s, y, 1.0 / sy))
        x, f_old, fx, gx = x + s, fx, f_new, g_new
        if np.max(np.abs(gx)) <= gtol:
            return x, report(k + 1, GRADIENT_TOL)
        if (f_old - fx) / max(abs(f_old), abs(fx), 1.0) <= ftol:
            return x, report(k + 1, VALUE_STAGNATION)
    return x, report(budget, BUDGET)


def gd_minimize(f, grad, x0, step, budget, gtol=DEFAULT_GTOL, patience=5):
    """Plain ``x <- x - step * grad(x)``; returns the best visited iterate.

    Stops early when the gradient is below ``gtol`` or when ``f`` has risen for
    ``patience`` consecutive steps (``stop_reason == "divergence"``).
    """
    if step <= 0 or budget < 0:
        raise ValueError("need step > 0 and budget >= 0")
    fg = _Counted(f, grad)
    x = np.array(x0, dtype=np.float64)
    fx, gx = fg(x)
    _check_finite(fx, gx, 0)
    best_x, best_f, best_g = x, fx, gx
    rises, reason, k = 0, BUDGET, 0
    while k < budget:
        if np.max(np.abs(gx), initial=0.0) <= gtol:
            reason = GRADIENT_TOL
            break
        x = x - step * gx
        f_new, gx = fg(x)
        k += 1
        _check_finite(f_new, gx, k)
        rises = rises + 1 if f_new > fx else 0
        fx = f_new
        if fx < best_f:
            best_x, best_f, best_g = x, fx, gx
        if rises >= patience:
            reason = DIVERGENCE
            break
    rep = OptimizeReport(k, best_f, float(np.max(np.abs(best_g), initial=0.0)),
                         reason == GRADIENT_TOL, reason, fg.n_evals)
    return best_x, rep
