"""Core data model for optimum allocation under box constraints.

Problems are stored as parallel tuples keyed by an ordered, duplicate-free
label list.  Set arguments (take-min set ``L``, take-max set ``U``) are
always sets of labels, never positions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import (
    InfeasibleProblem,
    NonPositiveAllocation,
    OverlappingSets,
    PartitionCoversAll,
    UnknownLabel,
    ZeroVariance,
)

Label = Hashable

__all__ = [
    "Allocation",
    "BoxProblem",
    "Kind",
    "LowerProblem",
    "Partition",
    "SolveTrace",
    "TraceRecord",
    "UpperProblem",
    "candidate",
    "objective",
    "set_function_s",
    "stsi_coefficients",
    "variance_of_estimator",
]


def _floats(values, name, size):
    out = tuple(float(v) for v in values)
    if len(out) != size:
        raise InfeasibleProblem(f"{name} has {len(out)} entries, expected {size}")
    if not all(math.isfinite(v) for v in out):
        raise InfeasibleProblem(f"{name} contains non-finite values")
    return out


def _labels(labels):
    out = tuple(labels)
    if not out:
        raise InfeasibleProblem("at least one stratum is required")
    if len(set(out)) != len(out):
        raise InfeasibleProblem("stratum labels must be unique")
    return out


class _Problem:
    """Shared label bookkeeping for the three problem flavours."""

    labels: tuple

    def _init_index(self):
        object.__setattr__(self, "_index", {h: i for i, h in enumerate(self.labels)})

    def index(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabel(label) from None

    def __len__(self):
        return len(self.labels)

    @property
    def label_set(self) -> frozenset:
        return frozenset(self.labels)


@dataclass(frozen=True, eq=False)
class BoxProblem(_Problem):
    """One instance of the two-sided (box) constrained allocation problem.

    Minimise ``sum(A_h**2 / x_h)`` subject to ``sum(x_h) == n`` and
    ``m_h <= x_h <= M_h``.  Feasibility is validated here so solvers never
    have to.
    """

    labels: tuple
    A: tuple
    m: tuple
    M: tuple
    n: float
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = _labels(self.labels)
        k = len(labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "A", _floats(self.A, "A", k))
        object.__setattr__(self, "m", _floats(self.m, "m", k))
        object.__setattr__(self, "M", _floats(self.M, "M", k))
        object.__setattr__(self, "n", float(self.n))
        if any(a <= 0 for a in self.A):
            raise InfeasibleProblem("A_h must be positive")
        for h, lo, hi in zip(labels, self.m, self.M):
            if not 0 < lo < hi:
                raise InfeasibleProblem(f"stratum {h!r}: need 0 < m_h < M_h, got m={lo}, M={hi}")
        lo, hi = math.fsum(self.m), math.fsum(self.M)
        if not lo <= self.n <= hi:
            raise InfeasibleProblem(f"n={self.n} outside [sum(m), sum(M)] = [{lo}, {hi}]")
        self._init_index()

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence], n: float) -> "BoxProblem":
        """Build from ``(label, A, m, M)`` tuples."""
        labels, A, m, M = zip(*rows)
        return cls(labels, A, m, M, n)

    def with_n(self, n: float) -> "BoxProblem":
        return BoxProblem(self.labels, self.A, self.m, self.M, n)

    def upper(self, n: float | None = None) -> "UpperProblem":
        """Drop the lower bounds."""
        return UpperProblem(self.labels, self.A, self.M, self.n if n is None else n)

    def lower(self, n: float | None = None) -> "LowerProblem":
        """Drop the upper bounds."""
        return LowerProblem(self.labels, self.A, self.m, self.n if n is None else n)


@dataclass(frozen=True, eq=False)
class UpperProblem(_Problem):
    """Allocation with upper bounds only (input of RNA)."""

    labels: tuple
    A: tuple
    M: tuple
    n: float
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = _labels(self.labels)
        k = len(labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "A", _floats(self.A, "A", k))
        object.__setattr__(self, "M", _floats(self.M, "M", k))
        object.__setattr__(self, "n", float(self.n))
        if any(a <= 0 for a in self.A):
            raise InfeasibleProblem("A_h must be positive")
        if any(v <= 0 for v in self.M):
            raise InfeasibleProblem("M_h must be positive")
        if not 0 < self.n <= math.fsum(self.M):
            raise InfeasibleProblem(f"n={self.n} outside (0, sum(M)]")
        self._init_index()

    m = None


@dataclass(frozen=True, eq=False)
class LowerProblem(_Problem):
    """Allocation with lower bounds only (input of LRNA)."""

    labels: tuple
    A: tuple
    m: tuple
    n: float
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = _labels(self.labels)
        k = len(labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "A", _floats(self.A, "A", k))
        object.__setattr__(self, "m", _floats(self.m, "m", k))
        object.__setattr__(self, "n", float(self.n))
        if any(a <= 0 for a in self.A):
            raise InfeasibleProblem("A_h must be positive")
        if any(v <= 0 for v in self.m):
            raise InfeasibleProblem("m_h must be positive")
        if self.n < math.fsum(self.m):
            raise InfeasibleProblem(f"n={self.n} below sum(m)")
        self._init_index()

    M = None


@dataclass(frozen=True)
class Partition:
    """Disjoint take-min set ``L`` and take-max set ``U``."""

    L: frozenset = frozenset()
    U: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "L", frozenset(self.L))
        object.__setattr__(self, "U", frozenset(self.U))
        common = self.L & self.U
        if common:
            raise OverlappingSets(f"labels in both L and U: {sorted(map(str, common))}")

    def validate(self, p) -> None:
        unknown = (self.L | self.U) - p.label_set
        if unknown:
            raise UnknownLabel(sorted(map(str, unknown)))
        if self.L and p.m is None:
            raise OverlappingSets("problem has no lower bounds but L is non-empty")
        if self.U and p.M is None:
            raise OverlappingSets("problem has no upper bounds but U is non-empty")

    def covers(self, p) -> bool:
        return len(self.L) + len(self.U) == len(p.labels)

    def free(self, p) -> list:
        """Take-Neyman labels, in problem order."""
        return [h for h in p.labels if h not in self.L and h not in self.U]


class Kind(str, enum.Enum):
    REGULAR = "regular"
    VERTEX = "vertex"


@dataclass(frozen=True)
class Allocation:
    labels: tuple
    x: tuple
    partition: Partition
    kind: Kind
    objective: float

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.x))

    def role(self, label) -> str:
        if label in self.partition.L:
            return "min"
        if label in self.partition.U:
            return "max"
        return "neyman"

    @property
    def roles(self) -> tuple:
        return tuple(self.role(h) for h in self.labels)

    @property
    def counts(self) -> dict:
        """Take-min / take-Neyman / take-max strata counts."""
        n_min, n_max = len(self.partition.L), len(self.partition.U)
        return {"min": n_min, "neyman": len(self.labels) - n_min - n_max, "max": n_max}


@dataclass(frozen=True)
class TraceRecord:
    r: int
    L: frozenset
    U: frozenset
    s: float | None
    rna_inner_iters: int


@dataclass(frozen=True)
class SolveTrace:
    iterations: tuple = ()

    @property
    def r_star(self) -> int:
        return len(self.iterations)

    @property
    def s_sequence(self) -> list:
        return [rec.s for rec in self.iterations]


def _as_partition(part) -> Partition:
    if isinstance(part, Partition):
        return part
    L, U = part
    return Partition(L, U)


def set_function_s(p, part) -> float:
    """Remaining sample over remaining coefficient mass.

    ``(n - sum(m_L) - sum(M_U)) / sum(A_h for h outside L and U)``.  May be
    zero or negative; no clamping is applied.
    """
    part = _as_partition(part)
    part.validate(p)
    if part.covers(p):
        raise PartitionCoversAll("s(L, U) is undefined when L and U cover all strata")
    num = [p.n]
    den = []
    for i, h in enumerate(p.labels):
        if h in part.L:
            num.append(-p.m[i])
        elif h in part.U:
            num.append(-p.M[i])
        else:
            den.append(p.A[i])
    return math.fsum(num) / math.fsum(den)


def candidate(p, part) -> tuple:
    """The vector taking ``m`` on L, ``M`` on U and ``A_h * s(L, U)`` elsewhere."""
    part = _as_partition(part)
    part.validate(p)
    s = None if part.covers(p) else set_function_s(p, part)
    out = []
    for i, h in enumerate(p.labels):
        if h in part.L:
            out.append(p.m[i])
        elif h in part.U:
            out.append(p.M[i])
        else:
            out.append(p.A[i] * s)
    return tuple(out)


def objective(p_or_A, x) -> float:
    """``sum(A_h**2 / x_h)``."""
    A = p_or_A.A if hasattr(p_or_A, "A") else p_or_A
    A, x = list(A), list(x)
    if len(A) != len(x):
        raise ValueError(f"length mismatch: {len(A)} coefficients, {len(x)} allocations")
    if any(v <= 0 for v in x):
        raise NonPositiveAllocation("every x_h must be positive")
    return math.fsum(a * a / v for a, v in zip(A, x))


def variance_of_estimator(A, B: float, x) -> float:
    return objective(A, x) - B


def stsi_coefficients(pop) -> tuple:
    """``A_h = N_h * S_h`` and ``B = sum(N_h * S_h**2)`` for simple random sampling in strata.

    ``pop`` is anything with a ``strata`` sequence of objects exposing
    ``N`` and ``S`` (see :class:`stratalloc.popgen.StrataPopulation`).
    """
    A, B = [], []
    for st in pop.strata:
        if st.N < 1:
            raise ValueError(f"stratum {st.label!r}: N must be >= 1")
        if st.S < 0:
            raise ValueError(f"stratum {st.label!r}: S must be >= 0")
        if st.S == 0:
            raise ZeroVariance(f"stratum {st.label!r} has zero standard deviation")
        A.append(st.N * st.S)
        B.append(st.N * st.S * st.S)
    return tuple(A), math.fsum(B)


def allocation_from_partition(p: BoxProblem, part: Partition) -> Allocation:
    x = candidate(p, part)
    kind = Kind.VERTEX if part.covers(p) else Kind.REGULAR
    return Allocation(p.labels, x, part, kind, objective(p, x))


def partition_from_values(p: BoxProblem, x: Mapping | Sequence) -> Partition:
    """Recover (L, U) from exact equality of ``x_h`` with its bounds."""
    if isinstance(x, Mapping):
        x = [x[h] for h in p.labels]
    L = {h for h, v, lo in zip(p.labels, x, p.m) if v == lo}
    U = {h for h, v, hi in zip(p.labels, x, p.M) if v == hi}
    return Partition(L, U)
