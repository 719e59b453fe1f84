"""Lambda-parametrised allocation: the fixed-point iteration (FPIA) and a bisection root finder.

For a multiplier ``lam > 0`` every stratum sits at ``M_h`` when
``lam <= (A_h / M_h)**2``, at ``m_h`` when ``lam >= (A_h / m_h)**2`` and at
``A_h / sqrt(lam)`` in between.  The optimum is the root of
``g_tilde(lam) = sum(x_h(lam)) - n``.

Thresholds are computed as ``(A_h / M_h) ** 2`` and the fixed-point map as
``(sum(A_J) / remaining) ** 2`` so that a lambda produced by the map lands
bit-exactly on a threshold whenever the exact arithmetic does.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .allocore import BoxProblem
from .errors import BracketFailure, NonPositiveLambda

__all__ = [
    "FpiaOutcome",
    "FpiaStatus",
    "LambdaPartition",
    "bisection_solve",
    "default_lambda0",
    "fpia_solve",
    "g_tilde",
    "lambda_partition",
    "phi",
    "x_of_lambda",
]


@dataclass(frozen=True)
class LambdaPartition:
    lam: float
    J_M: frozenset
    J_m: frozenset
    J: frozenset


class FpiaStatus(str, enum.Enum):
    CONVERGED = "converged"
    BLOCKED = "blocked"
    OSCILLATING = "oscillating"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class FpiaOutcome:
    status: FpiaStatus
    lambda_history: tuple
    allocation: tuple | None = None
    iterations: int = 0
    partitions: tuple = field(default=(), repr=False)


def _upper_thr(p):
    return [(a / hi) ** 2 for a, hi in zip(p.A, p.M)]


def _lower_thr(p):
    return [(a / lo) ** 2 for a, lo in zip(p.A, p.m)]


def _check_lambda(lam):
    if not lam > 0:
        raise NonPositiveLambda(f"lambda must be positive, got {lam}")


def lambda_partition(p: BoxProblem, lam: float) -> LambdaPartition:
    _check_lambda(lam)
    J_M, J_m, J = set(), set(), set()
    for h, tu, tl in zip(p.labels, _upper_thr(p), _lower_thr(p)):
        if lam <= tu:
            J_M.add(h)
        elif lam >= tl:
            J_m.add(h)
        else:
            J.add(h)
    return LambdaPartition(lam, frozenset(J_M), frozenset(J_m), frozenset(J))


def _x(p, lam, tu, tl):
    root = math.sqrt(lam)
    out = []
    for a, lo, hi, u, l in zip(p.A, p.m, p.M, tu, tl):
        if lam <= u:
            out.append(hi)
        elif lam >= l:
            out.append(lo)
        else:
            out.append(a / root)
    return out


def x_of_lambda(p: BoxProblem, lam: float) -> tuple:
    _check_lambda(lam)
    return tuple(_x(p, lam, _upper_thr(p), _lower_thr(p)))


def g_tilde(p: BoxProblem, lam: float) -> float:
    _check_lambda(lam)
    return math.fsum(_x(p, lam, _upper_thr(p), _lower_thr(p)) + [-p.n])


def phi(p: BoxProblem, lam: float) -> float | None:
    """``1 / s(J_m, J_M)**2``; None where undefined.

    Undefined means the sets cover every stratum or ``s <= 0``.  A negative
    ``s`` would still square to a positive number, but no positive
    ``sqrt(lam) = 1/s`` corresponds to it, so a fixed point there is not a
    solution.
    """
    lp = lambda_partition(p, lam)
    return _phi_from_sets(p, lp.J_m, lp.J_M)


def _phi_from_sets(p, J_m, J_M):
    num, den = [p.n], []
    for h, a, lo, hi in zip(p.labels, p.A, p.m, p.M):
        if h in J_M:
            num.append(-hi)
        elif h in J_m:
            num.append(-lo)
        else:
            den.append(a)
    if not den:
        return None
    rem = math.fsum(num)
    if rem <= 0:
        return None
    return (math.fsum(den) / rem) ** 2


def default_lambda0(p: BoxProblem) -> float:
    """``1 / s(empty, empty)**2``, the usual FPIA starting point."""
    return (math.fsum(p.A) / p.n) ** 2


def fpia_solve(p: BoxProblem, lambda0: float | None = None, max_iter: int = 200,
               tol: float = 1e-12) -> FpiaOutcome:
    """Run the fixed-point iteration ``lam <- 1 / s(J_m(lam), J_M(lam))**2``.

    Failures are reported through ``status`` rather than raised: BLOCKED when
    the map is undefined at the current lambda, OSCILLATING when a lambda
    value recurs (relative 1e-12) at distance two or more.
    """
    lam = default_lambda0(p) if lambda0 is None else float(lambda0)
    _check_lambda(lam)
    history = [lam]
    parts = []
    for k in range(max_iter):
        lp = lambda_partition(p, lam)
        parts.append(lp)
        nxt = _phi_from_sets(p, lp.J_m, lp.J_M)
        if nxt is None:
            return FpiaOutcome(FpiaStatus.BLOCKED, tuple(history), None, k + 1, tuple(parts))
        history.append(nxt)
        if abs(nxt - lam) <= tol * lam:
            x = x_of_lambda(p, nxt)
            return FpiaOutcome(FpiaStatus.CONVERGED, tuple(history), x, k + 1, tuple(parts))
        for prev in history[:-2]:
            if abs(prev - nxt) <= 1e-12 * abs(nxt):
                return FpiaOutcome(FpiaStatus.OSCILLATING, tuple(history), None, k + 1, tuple(parts))
        lam = nxt
    return FpiaOutcome(FpiaStatus.MAX_ITERATIONS, tuple(history), None, max_iter, tuple(parts))


def bisection_solve(p: BoxProblem, tol: float = 0.0, eps: float = 1e-3,
                    max_iter: int = 2000, return_iterations: bool = False):
    """Solve ``g_tilde(lam) = 0`` by bisection on the non-increasing ``g_tilde``.

    With ``tol=0`` the bracket is halved until it cannot shrink further in
    floating point, which pins lambda to within an ulp.  Independent of the
    recursive solvers; used as their oracle in tests.
    """
    tu, tl = _upper_thr(p), _lower_thr(p)
    n = p.n

    def g(lam):
        # rounded total minus n, the same comparison the feasibility check uses
        return math.fsum(_x(p, lam, tu, tl)) - n

    lo, hi = (1 - eps) * min(tu), (1 + eps) * max(tl)
    g_lo, g_hi = g(lo), g(hi)
    widen = 0
    while g_lo < 0 or g_hi > 0:
        if widen > 60:
            raise BracketFailure(f"g_tilde has no sign change on [{lo}, {hi}]")
        lo, hi = lo / 2, hi * 2
        g_lo, g_hi = g(lo), g(hi)
        widen += 1
    its = 0
    if g_lo == 0:
        best = lo
    elif g_hi == 0:
        best = hi
    else:
        best = None
        while its < max_iter:
            its += 1
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            gm = g(mid)
            if gm == 0 or abs(gm) <= tol:
                best = mid
                break
            if gm > 0:
                lo, g_lo = mid, gm
            else:
                hi, g_hi = mid, gm
        if best is None:
            best = lo if abs(g_lo) <= abs(g_hi) else hi
    x = tuple(_x(p, best, tu, tl))
    return (x, its) if return_iterations else x
