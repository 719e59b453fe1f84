"""Recursive Neyman solvers: RNA, LRNA, RNABOX (plus its twin) and the naive recursion.

All branching comparisons are exact floating point ``>=`` / ``<=``; no
epsilon is applied anywhere in this module.  Tolerances belong to
:mod:`stratalloc.verify`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .allocore import (
    Allocation,
    BoxProblem,
    Kind,
    LowerProblem,
    Partition,
    SolveTrace,
    TraceRecord,
    UpperProblem,
    objective,
)

__all__ = [
    "LrnaResult",
    "NaiveResult",
    "RnaResult",
    "lrna",
    "naive_rna_box",
    "rna",
    "rna_with_domain",
    "rnabox",
    "rnabox_twin",
]


@dataclass(frozen=True)
class RnaResult:
    labels: tuple
    x: tuple
    U: frozenset
    inner_iterations: int


@dataclass(frozen=True)
class LrnaResult:
    labels: tuple
    x: tuple
    L: frozenset
    inner_iterations: int


@dataclass(frozen=True)
class NaiveResult:
    labels: tuple
    x: tuple
    partition: Partition
    converged_feasible: bool
    iterations: int


# The private workers take parallel coefficient lists plus ``idx``, the
# positions making up the current (possibly reduced) stratum set, and
# return values keyed by position.


def _rna(A, M, n, idx, domain=None):
    U = set()
    iters = 0
    s = None
    while True:
        rest = [i for i in idx if i not in U]
        if not rest:
            break
        iters += 1
        s = math.fsum([n] + [-M[i] for i in U]) / math.fsum(A[i] for i in rest)
        scan = rest if domain is None else [i for i in rest if i in domain]
        new = [i for i in scan if A[i] * s >= M[i]]
        if not new:
            break
        U.update(new)
    x = {i: (M[i] if i in U else A[i] * s) for i in idx}
    return x, U, iters


def _lrna(A, m, n, idx):
    L = set()
    iters = 0
    s = None
    while True:
        rest = [i for i in idx if i not in L]
        if not rest:
            break
        iters += 1
        s = math.fsum([n] + [-m[i] for i in L]) / math.fsum(A[i] for i in rest)
        new = [i for i in rest if A[i] * s <= m[i]]
        if not new:
            break
        L.update(new)
    x = {i: (m[i] if i in L else A[i] * s) for i in idx}
    return x, L, iters


def _positions(p, labels):
    return {p.index(h) for h in labels}


def rna(p: UpperProblem) -> RnaResult:
    """Recursive Neyman allocation under upper bounds only."""
    return rna_with_domain(p, None)


def rna_with_domain(p: UpperProblem, J=None) -> RnaResult:
    """RNA whose take-max search is restricted to the labels in ``J``.

    The caller must guarantee that the optimal take-max set lies inside
    ``J``; otherwise the output is unspecified.  ``J=None`` means all strata.
    """
    idx = list(range(len(p.labels)))
    domain = None if J is None else _positions(p, J)
    x, U, iters = _rna(p.A, p.M, p.n, idx, domain)
    return RnaResult(
        p.labels,
        tuple(x[i] for i in idx),
        frozenset(p.labels[i] for i in U),
        iters,
    )


def lrna(p: LowerProblem) -> LrnaResult:
    """Recursive Neyman allocation under lower bounds only."""
    idx = list(range(len(p.labels)))
    x, L, iters = _lrna(p.A, p.m, p.n, idx)
    return LrnaResult(
        p.labels,
        tuple(x[i] for i in idx),
        frozenset(p.labels[i] for i in L),
        iters,
    )


def _finish(p, x, L, U):
    labels = p.labels
    part = Partition({labels[i] for i in L}, {labels[i] for i in U})
    kind = Kind.VERTEX if len(L) + len(U) == len(labels) else Kind.REGULAR
    return Allocation(labels, x, part, kind, objective(p.A, x))


def _s_positions(p, L, U):
    """s(L, U) on the original problem, or None if L and U cover everything."""
    if len(L) + len(U) == len(p.labels):
        return None
    num = [p.n] + [-p.m[i] for i in L] + [-p.M[i] for i in U]
    den = [p.A[i] for i in range(len(p.labels)) if i not in L and i not in U]
    return math.fsum(num) / math.fsum(den)


def rnabox(p: BoxProblem, want_trace: bool = False, use_prior_domain: bool = False):
    """Optimum allocation under simultaneous lower and upper bounds.

    Each outer iteration runs RNA on the strata not yet fixed at their lower
    bound, then moves every non-take-max stratum whose RNA value does not
    exceed ``m_h`` into the take-min set.

    Parameters
    ----------
    p : BoxProblem
    want_trace : bool
        Record ``(L_r, U_r, s(L_r, U_r))`` for every outer iteration.
    use_prior_domain : bool
        Restrict the take-max search of iteration ``r`` to ``U_{r-1}``.
        Gives identical output, scans fewer strata.

    Returns
    -------
    (Allocation, SolveTrace or None)
    """
    A, m, M = p.A, p.m, p.M
    H = list(range(len(p.labels)))
    L: list = []
    records = []
    prev_U = None
    r = 0
    while True:
        r += 1
        n_r = math.fsum([p.n] + [-m[i] for i in L])
        domain = prev_U if (use_prior_domain and r > 1) else None
        xs, _, iters = _rna(A, M, n_r, H, domain) if H else ({}, set(), 0)
        U = {i for i in H if xs[i] == M[i]}
        new_L = [i for i in H if i not in U and xs[i] <= m[i]]
        if want_trace:
            records.append(
                TraceRecord(
                    r,
                    frozenset(p.labels[i] for i in L),
                    frozenset(p.labels[i] for i in U),
                    _s_positions(p, set(L), U),
                    iters,
                )
            )
        if not new_L:
            break
        dropped = set(new_L)
        H = [i for i in H if i not in dropped]
        L.extend(new_L)
        prev_U = U
    L_set = set(L)
    x = tuple(m[i] if i in L_set else xs[i] for i in range(len(p.labels)))
    alloc = _finish(p, x, L_set, U)
    return alloc, (SolveTrace(tuple(records)) if want_trace else None)


def rnabox_inner_iterations(p: BoxProblem) -> list:
    """Vector of RNA iteration counts, one entry per outer RNABOX iteration."""
    _, trace = rnabox(p, want_trace=True)
    return [rec.rna_inner_iters for rec in trace.iterations]


def rnabox_twin(p: BoxProblem) -> Allocation:
    """RNABOX with the roles of L and U swapped: LRNA inside, take-max sets grown outside."""
    A, m, M = p.A, p.m, p.M
    H = list(range(len(p.labels)))
    U: list = []
    while True:
        n_r = math.fsum([p.n] + [-M[i] for i in U])
        xs, _, _ = _lrna(A, m, n_r, H) if H else ({}, set(), 0)
        L = {i for i in H if xs[i] == m[i]}
        new_U = [i for i in H if i not in L and xs[i] >= M[i]]
        if not new_U:
            break
        dropped = set(new_U)
        H = [i for i in H if i not in dropped]
        U.extend(new_U)
    U_set = set(U)
    x = tuple(M[i] if i in U_set else xs[i] for i in range(len(p.labels)))
    return _finish(p, x, L, U_set)


def naive_rna_box(p: BoxProblem) -> NaiveResult:
    """Known-incorrect two-sided generalisation of RNA, kept for testing and teaching.

    L and U are grown simultaneously from the same ``s(L, U)`` with no
    backtracking.  The result can be infeasible or suboptimal; the
    ``converged_feasible`` flag reports whether it at least respects the
    bounds.
    """
    A, m, M = p.A, p.m, p.M
    k = len(p.labels)
    L: set = set()
    U: set = set()
    iters = 0
    s = None
    while True:
        rest = [i for i in range(k) if i not in L and i not in U]
        if not rest:
            break
        iters += 1
        s = _s_positions(p, L, U)
        new_U = [i for i in rest if A[i] * s >= M[i]]
        new_L = [i for i in rest if A[i] * s <= m[i]]
        if not new_U and not new_L:
            break
        U.update(new_U)
        L.update(new_L)
    x = tuple(m[i] if i in L else M[i] if i in U else A[i] * s for i in range(k))
    tol = 1e-9 * max(abs(p.n), 1.0)
    feasible = all(lo <= v <= hi for v, lo, hi in zip(x, m, M)) and abs(math.fsum(x) - p.n) <= tol
    part = Partition({p.labels[i] for i in L}, {p.labels[i] for i in U})
    return NaiveResult(p.labels, x, part, feasible, iters)
