"""Analytic flop counts for training the ridge (direct / QR) and GLVQ readouts.

T training samples, N hidden units, L classes, P prototypes per class,
I optimizer iterations.  Each procedure exposes its per-step counts and the
closed-form total; the two must agree.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class CostInputs:
    t: int
    n: int
    l: int
    p: int = 1
    i: int = 0

    def __post_init__(self):
        if min(self.t, self.n, self.l, self.p) < 1 or self.i < 0:
            raise ValueError(f"invalid cost inputs {self}")


def steps_rls_direct(c):
    t, n, l = c.t, c.n, c.l
    return {
        "gram": n * (2 * t * n - n + 2),
        "inverse": 2 * n**3 / 3,
        "solve": t * n * (2 * n - 1) + l * n * (2 * t - 1),
    }


def flops_rls_direct(c):
    t, n, l = c.t, c.n, c.l
    return n * (2 * n**2 / 3 + 4 * t * n + 2 * t * l - n - t - l + 2)


def steps_rls_qr(c):
    t, n, l = c.t, c.n, c.l
    return {
        "rhs": l * n * (2 * t - 1),
        "factor": n * (2 * t * n - n + 2) + 4 * n**3 / 3,
        "solve": 2 * l * n * (n - 1) + l * n**2,
    }


def flops_rls_qr(c):
    t, n, l = c.t, c.n, c.l
    return n * (4 * n**2 / 3 + 2 * t * n + 2 * t * l + 3 * l * n - n - 3 * l + 2)


def steps_glvq(c):
    t, n, l, p, i = c.t, c.n, c.l, c.p, c.i
    return {
        "init": t * n,
        "distances": i * t * p * l * (3 * n - 1),
        "update": i * t * (6 * n + p * l + 19),
    }


def flops_glvq(c):
    return c.i * c.t * (3 * c.p * c.l * c.n + 6 * c.n + 19) + c.t * c.n


def relative_cost(c):
    """(qr / direct, glvq / direct) flop ratios."""
    base = flops_rls_direct(c)
    return flops_rls_qr(c) / base, flops_glvq(c) / base


def cost_table(c):
    qr_ratio, glvq_ratio = relative_cost(c)
    return {
        "inputs": {"T": c.t, "N": c.n, "L": c.l, "P": c.p, "I": c.i},
        "rls_direct": flops_rls_direct(c),
        "rls_qr": flops_rls_qr(c),
        "glvq": flops_glvq(c),
        "qr_ratio": qr_ratio,
        "glvq_ratio": glvq_ratio,
    }
