"""Optimality certificates, KKT multiplier reconstruction, brute-force oracle and trace audits."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .allocore import (
    Allocation,
    BoxProblem,
    Partition,
    SolveTrace,
    UpperProblem,
    allocation_from_partition,
)
from .errors import MalformedAllocation, TooManyStrata

__all__ = [
    "Case",
    "Multipliers",
    "OptimalityReport",
    "TraceViolation",
    "Violation",
    "audit_trace",
    "check_box_optimality",
    "check_lower_optimality",
    "check_upper_optimality",
    "oracle_enumerate",
]

DEFAULT_TOL = 1e-9
MAX_ENUM_STRATA = 12


class Case(str, enum.Enum):
    REGULAR = "RegularCaseI"
    VERTEX = "VertexCaseII"


@dataclass(frozen=True)
class Violation:
    label: object
    condition: str
    lhs: float
    rhs: float


@dataclass(frozen=True)
class Multipliers:
    lam: float
    mu_m: dict
    mu_M: dict
    stationarity: dict

    def max_abs_stationarity(self) -> float:
        return max((abs(v) for v in self.stationarity.values()), default=0.0)


@dataclass(frozen=True)
class OptimalityReport:
    is_optimal: bool
    case: Case
    violations: tuple = ()
    multipliers: Multipliers | None = None
    partition: Partition | None = field(default=None, repr=False)


def _gt(a, b, tol):
    """``a > b`` by more than the relative tolerance."""
    return a - b > tol * max(abs(a), abs(b), 1e-300)


def _structure(p, labels, x, part, tol):
    if tuple(labels) != tuple(p.labels):
        raise MalformedAllocation("allocation labels do not match the problem")
    if len(x) != len(p.labels):
        raise MalformedAllocation(f"allocation has {len(x)} entries, problem has {len(p.labels)}")
    try:
        part.validate(p)
    except Exception as exc:
        raise MalformedAllocation(str(exc)) from exc
    for i, h in enumerate(p.labels):
        if h in part.L and abs(x[i] - p.m[i]) > tol * p.m[i]:
            raise MalformedAllocation(f"stratum {h!r} is take-min but x={x[i]} != m={p.m[i]}")
        if h in part.U and abs(x[i] - p.M[i]) > tol * p.M[i]:
            raise MalformedAllocation(f"stratum {h!r} is take-max but x={x[i]} != M={p.M[i]}")


def _multipliers(p, x, lam, part):
    mu_m, mu_M, res = {}, {}, {}
    for i, h in enumerate(p.labels):
        a2 = p.A[i] ** 2
        mm = lam - a2 / p.m[i] ** 2 if h in part.L else 0.0
        mM = a2 / p.M[i] ** 2 - lam if p.M is not None and h in part.U else 0.0
        mu_m[h], mu_M[h] = mm, mM
        res[h] = -a2 / x[i] ** 2 + lam - mm + mM if x[i] > 0 else math.inf
    return Multipliers(lam, mu_m, mu_M, res)


def _vertex_s(p, part):
    """A point of ``[max_U M/A, min_L m/A]``; midpoint when both ends exist."""
    hi = min((p.m[p.index(h)] / p.A[p.index(h)] for h in part.L), default=None)
    lo = max((p.M[p.index(h)] / p.A[p.index(h)] for h in part.U), default=None)
    if lo is not None and hi is not None:
        return 0.5 * (lo + hi)
    return hi if lo is None else lo


def _check_box(p, x, part, tol):
    viol = []
    scale_n = tol * max(abs(p.n), 1.0)
    total = math.fsum(x)
    if abs(total - p.n) > scale_n:
        viol.append(Violation(None, "sum", total, p.n))
    for i, h in enumerate(p.labels):
        if _gt(p.m[i], x[i], tol):
            viol.append(Violation(h, "lower_bound", x[i], p.m[i]))
        if _gt(x[i], p.M[i], tol):
            viol.append(Violation(h, "upper_bound", x[i], p.M[i]))

    if part.covers(p):
        case = Case.VERTEX
        if part.L and part.U:
            u_lab = max(part.U, key=lambda h: p.M[p.index(h)] / p.A[p.index(h)])
            l_lab = min(part.L, key=lambda h: p.m[p.index(h)] / p.A[p.index(h)])
            lhs = p.M[p.index(u_lab)] / p.A[p.index(u_lab)]
            rhs = p.m[p.index(l_lab)] / p.A[p.index(l_lab)]
            if _gt(lhs, rhs, tol):
                viol.append(Violation(u_lab, "vertex_separation", lhs, rhs))
        bound_total = math.fsum([p.m[p.index(h)] for h in part.L] + [p.M[p.index(h)] for h in part.U])
        if abs(bound_total - p.n) > scale_n:
            viol.append(Violation(None, "vertex_total", bound_total, p.n))
        s = _vertex_s(p, part)
    else:
        case = Case.REGULAR
        num = [p.n] + [-p.m[p.index(h)] for h in part.L] + [-p.M[p.index(h)] for h in part.U]
        den = [p.A[i] for i, h in enumerate(p.labels) if h not in part.L and h not in part.U]
        s = math.fsum(num) / math.fsum(den)
        inv = 1.0 / s if s > 0 else math.inf
        for i, h in enumerate(p.labels):
            a, lo, hi = p.A[i], p.m[i], p.M[i]
            if h in part.L:
                if _gt(s, lo / a, tol):
                    viol.append(Violation(h, "take_min", s, lo / a))
                    # same condition read as A_h/m_h <= A_v/x_v for the Neyman strata
                    viol.append(Violation(h, "take_min_reciprocal", a / lo, inv))
            elif _gt(lo / a, s, tol):
                viol.append(Violation(h, "not_take_min", s, lo / a))
            if h in part.U:
                if _gt(hi / a, s, tol):
                    viol.append(Violation(h, "take_max", s, hi / a))
                    viol.append(Violation(h, "take_max_reciprocal", inv, a / hi))
            elif _gt(s, hi / a, tol):
                viol.append(Violation(h, "not_take_max", s, hi / a))
            if h not in part.L and h not in part.U and abs(x[i] - a * s) > tol * max(abs(x[i]), 1e-300):
                viol.append(Violation(h, "neyman_value", x[i], a * s))

    mult = None
    if s is not None and s > 0 and all(v > 0 for v in x):
        mult = _multipliers(p, x, 1.0 / (s * s), part)
    return OptimalityReport(not viol, case, tuple(viol), mult, part)


def check_box_optimality(p: BoxProblem, alloc: Allocation, tol: float = DEFAULT_TOL) -> OptimalityReport:
    """Certify ``alloc`` against the two-case optimality conditions.

    Regular case: the take-min set is exactly ``{h : s <= m_h/A_h}`` and the
    take-max set exactly ``{h : s >= M_h/A_h}`` with ``s = s(L, U)``.
    Vertex case: ``max_U M_h/A_h <= min_L m_h/A_h`` and the bound total
    equals ``n``.  Scalar comparisons use relative tolerance ``tol``.

    When the supplied partition does not certify the point, the partition
    read off the values themselves is tried as well, since several
    partitions can describe the same vector.
    """
    x = tuple(float(v) for v in alloc.x)
    part = alloc.partition
    _structure(p, alloc.labels, x, part, tol)
    report = _check_box(p, x, part, tol)
    if report.is_optimal:
        return report
    alt = Partition(
        {h for i, h in enumerate(p.labels) if abs(x[i] - p.m[i]) <= tol * p.m[i]},
        {h for i, h in enumerate(p.labels) if abs(x[i] - p.M[i]) <= tol * p.M[i]},
    )
    if alt != part:
        alt_report = _check_box(p, x, alt, tol)
        if alt_report.is_optimal:
            return alt_report
    return report


def check_upper_optimality(p: UpperProblem, result, tol: float = DEFAULT_TOL) -> OptimalityReport:
    """Certify an RNA result: ``U = {h : A_h s(empty, U) >= M_h}``, or ``U = H`` with ``sum(M) = n``."""
    x = tuple(float(v) for v in result.x)
    part = Partition((), result.U)
    _structure(p, result.labels, x, part, tol)
    viol = []
    scale_n = tol * max(abs(p.n), 1.0)
    total = math.fsum(x)
    if abs(total - p.n) > scale_n:
        viol.append(Violation(None, "sum", total, p.n))
    if part.covers(p):
        case = Case.VERTEX
        s = max(p.M[i] / p.A[i] for i in range(len(p.labels)))
    else:
        case = Case.REGULAR
        num = [p.n] + [-p.M[p.index(h)] for h in part.U]
        den = [p.A[i] for i, h in enumerate(p.labels) if h not in part.U]
        s = math.fsum(num) / math.fsum(den)
        for i, h in enumerate(p.labels):
            a, hi = p.A[i], p.M[i]
            if h in part.U:
                if _gt(hi / a, s, tol):
                    viol.append(Violation(h, "take_max", s, hi / a))
            else:
                if _gt(s, hi / a, tol):
                    viol.append(Violation(h, "not_take_max", s, hi / a))
                if abs(x[i] - a * s) > tol * max(abs(x[i]), 1e-300):
                    viol.append(Violation(h, "neyman_value", x[i], a * s))
    mult = None
    if s > 0 and all(v > 0 for v in x):
        mult = _multipliers(p, x, 1.0 / (s * s), part)
    return OptimalityReport(not viol, case, tuple(viol), mult, part)


def check_lower_optimality(p, result, tol: float = DEFAULT_TOL) -> OptimalityReport:
    """Mirror of :func:`check_upper_optimality` for an LRNA result."""
    x = tuple(float(v) for v in result.x)
    part = Partition(result.L, ())
    _structure(p, result.labels, x, part, tol)
    viol = []
    total = math.fsum(x)
    if abs(total - p.n) > tol * max(abs(p.n), 1.0):
        viol.append(Violation(None, "sum", total, p.n))
    if part.covers(p):
        case = Case.VERTEX
        s = min(p.m[i] / p.A[i] for i in range(len(p.labels)))
    else:
        case = Case.REGULAR
        num = [p.n] + [-p.m[p.index(h)] for h in part.L]
        den = [p.A[i] for i, h in enumerate(p.labels) if h not in part.L]
        s = math.fsum(num) / math.fsum(den)
        for i, h in enumerate(p.labels):
            a, lo = p.A[i], p.m[i]
            if h in part.L:
                if _gt(s, lo / a, tol):
                    viol.append(Violation(h, "take_min", s, lo / a))
            else:
                if _gt(lo / a, s, tol):
                    viol.append(Violation(h, "not_take_min", s, lo / a))
                if abs(x[i] - a * s) > tol * max(abs(x[i]), 1e-300):
                    viol.append(Violation(h, "neyman_value", x[i], a * s))
    mult = None
    if s > 0 and all(v > 0 for v in x):
        mult = _multipliers(p, x, 1.0 / (s * s), part)
    return OptimalityReport(not viol, case, tuple(viol), mult, part)


@lru_cache(maxsize=None)
def _codes(k):
    # 0 = Neyman, 1 = take-min, 2 = take-max; product order is label-lexicographic
    return np.array(list(itertools.product((0, 1, 2), repeat=k)), dtype=np.int8).reshape(-1, k)


def enumerate_candidates(p: BoxProblem, feas_tol: float = 1e-9):
    """All feasible Definition-style candidates as ``(codes, x, objective)`` arrays."""
    k = len(p.labels)
    if k > MAX_ENUM_STRATA:
        raise TooManyStrata(f"enumeration supports at most {MAX_ENUM_STRATA} strata, got {k}")
    A, m, M = (np.asarray(v, dtype=float) for v in (p.A, p.m, p.M))
    codes = _codes(k)
    is_L, is_U = codes == 1, codes == 2
    free = codes == 0
    num = p.n - (is_L * m).sum(axis=1) - (is_U * M).sum(axis=1)
    den = (free * A).sum(axis=1)
    has_free = den > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(has_free, num / np.where(has_free, den, 1.0), 0.0)
    x = np.where(is_L, m, np.where(is_U, M, A * s[:, None]))
    ok = np.all(x >= m * (1 - feas_tol), axis=1) & np.all(x <= M * (1 + feas_tol), axis=1)
    ok &= np.all(x > 0, axis=1)
    ok &= np.abs(x.sum(axis=1) - p.n) <= feas_tol * max(abs(p.n), 1.0)
    codes, x = codes[ok], x[ok]
    f = (A * A / x).sum(axis=1)
    return codes, x, f


def oracle_enumerate(p: BoxProblem) -> Allocation:
    """Brute-force optimum over all ``3**|H|`` assignments to take-min / take-max / Neyman."""
    codes, _, f = enumerate_candidates(p)
    if len(f) == 0:
        raise MalformedAllocation("no feasible candidate found")
    best = codes[int(np.argmin(f))]
    part = Partition(
        {h for h, c in zip(p.labels, best) if c == 1},
        {h for h, c in zip(p.labels, best) if c == 2},
    )
    return allocation_from_partition(p, part)


@dataclass(frozen=True)
class TraceViolation:
    r: int
    kind: str
    detail: str


def audit_trace(trace: SolveTrace, n_strata: int | None = None) -> list:
    """Check the monotone structure of an RNABOX trace.

    Take-min sets must grow strictly, take-max sets must not grow,
    ``s(L_r, U_r)`` must not increase, and there are at most ``|H| + 1``
    iterations.
    """
    out = []
    recs = trace.iterations
    for expect, rec in enumerate(recs, start=1):
        if rec.r != expect:
            out.append(TraceViolation(rec.r, "index", f"expected r={expect}"))
    for a, b in zip(recs, recs[1:]):
        if not a.L < b.L:
            out.append(TraceViolation(b.r, "L_growth", f"L_{a.r} is not a proper subset of L_{b.r}"))
        if not b.U <= a.U:
            out.append(TraceViolation(b.r, "U_monotone", f"U_{b.r} is not a subset of U_{a.r}"))
        if a.s is not None and b.s is not None and b.s > a.s:
            out.append(TraceViolation(b.r, "s_monotone", f"s_{b.r}={b.s!r} > s_{a.r}={a.s!r}"))
    if n_strata is not None and len(recs) > n_strata + 1:
        out.append(TraceViolation(len(recs), "length", f"r*={len(recs)} exceeds |H|+1={n_strata + 1}"))
    return out
