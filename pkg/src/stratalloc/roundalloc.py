"""Sum-preserving integer rounding of a continuous allocation."""

from __future__ import annotations

import math

from .allocore import objective
from .errors import SumMismatch

__all__ = ["bound_warnings", "round_preserve_sum", "rounding_penalty"]


def round_preserve_sum(x, n: int, sum_tol: float = 1e-6) -> list:
    """Largest-remainder rounding.

    Every entry is floored, then the ``n - sum(floor)`` leftover units go to
    the entries with the largest fractional parts.  Equal fractional parts
    are served in input (label) order.
    """
    x = [float(v) for v in x]
    n = int(n)
    if abs(math.fsum(x) - n) > sum_tol * max(1.0, abs(n)):
        raise SumMismatch(f"sum(x)={math.fsum(x)!r} does not match n={n}")
    if any(v <= 0 for v in x):
        raise ValueError("x must be positive")
    out = [math.floor(v) for v in x]
    extra = n - sum(out)
    order = sorted(range(len(x)), key=lambda i: (-(x[i] - out[i]), i))
    # 0 <= extra <= len(x) because sum(floor) <= sum(x) < n + 1
    for i in order[:extra]:
        out[i] += 1
    return out


def rounding_penalty(A, x_cont, x_int) -> float:
    """Objective ratio ``f(x_int) / f(x_cont)``."""
    return objective(A, x_int) / objective(A, x_cont)


def bound_warnings(p, x_int) -> list:
    """Messages for rounded entries that left ``[m_h, M_h]``; nothing is repaired."""
    out = []
    for h, v, lo, hi in zip(p.labels, x_int, p.m, p.M):
        if v < lo:
            out.append(f"stratum {h}: rounded value {v} below lower bound {lo}")
        elif v > hi:
            out.append(f"stratum {h}: rounded value {v} above upper bound {hi}")
    return out
