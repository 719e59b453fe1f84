"""Synthetic stratified populations built from log-normal draws.

Set ``i`` (1-based) holds ``set_size`` draws from a log-normal law with
``mu = 0`` and ``sigma = log(1 + i)``.  Each set is cut into strata by a
geometric progression of boundaries between its minimum and maximum.

Randomness: ``numpy.random.SeedSequence(seed).spawn(K)`` gives one child
seed per set, each driving its own PCG64 generator, so a set's values
depend only on ``(seed, i, set_size)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .allocore import BoxProblem, stsi_coefficients
from .errors import DegenerateRange, InfeasibleProblem

__all__ = [
    "Stratum",
    "StrataPopulation",
    "build_population",
    "default_lower",
    "default_upper",
    "generate_lognormal_sets",
    "geometric_stratify",
    "lognormal_sigma",
    "population_to_problem",
    "sample_size",
    "stratify_values",
]


@dataclass(frozen=True)
class Stratum:
    label: str
    N: int
    S: float


@dataclass(frozen=True)
class StrataPopulation:
    strata: tuple

    def __post_init__(self):
        object.__setattr__(self, "strata", tuple(self.strata))
        labels = [st.label for st in self.strata]
        if len(set(labels)) != len(labels):
            raise ValueError("stratum labels must be unique")
        if any(st.N < 1 for st in self.strata):
            raise ValueError("every stratum needs N >= 1")

    @property
    def N(self) -> int:
        return sum(st.N for st in self.strata)

    @property
    def labels(self) -> tuple:
        return tuple(st.label for st in self.strata)

    def __len__(self):
        return len(self.strata)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", "N", "S"])
            for st in self.strata:
                w.writerow([st.label, st.N, repr(float(st.S))])

    @classmethod
    def from_csv(cls, path) -> "StrataPopulation":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple(Stratum(r["label"], int(r["N"]), float(r["S"])) for r in rows))


def lognormal_sigma(i: int) -> float:
    return math.log1p(i)


def generate_lognormal_sets(K: int, set_size: int, seed: int) -> list:
    if K < 1 or set_size < 2:
        raise ValueError("need K >= 1 and set_size >= 2")
    children = np.random.SeedSequence(seed).spawn(K)
    out = []
    for i, child in enumerate(children, start=1):
        rng = np.random.Generator(np.random.PCG64(child))
        out.append(rng.lognormal(mean=0.0, sigma=lognormal_sigma(i), size=set_size))
    return out


def geometric_stratify(values, L: int) -> tuple:
    """Interior boundaries ``min * r**j`` for ``j = 1..L-1`` with ``r = (max/min)**(1/L)``."""
    values = np.asarray(values, dtype=float)
    if L < 2:
        raise ValueError("need at least two strata")
    if np.any(values <= 0):
        raise ValueError("values must be positive")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise DegenerateRange("all values are equal")
    r = (hi / lo) ** (1.0 / L)
    return tuple(lo * r**j for j in range(1, L))


def stratify_values(values, L: int, min_size: int = 2) -> list:
    """Split ``values`` into half-open geometric strata.

    Strata with fewer than ``min_size`` members are merged into their right
    neighbour (the last one into its left neighbour), so every stratum has a
    defined sample standard deviation.
    """
    values = np.asarray(values, dtype=float)
    bounds = np.asarray(geometric_stratify(values, L))
    idx = np.searchsorted(bounds, values, side="right")
    groups = [values[idx == j] for j in range(L)]
    merged, carry = [], np.empty(0)
    for g in groups:
        g = np.concatenate([carry, g])
        if len(g) < min_size:
            carry = g
        else:
            merged.append(g)
            carry = np.empty(0)
    if len(carry):
        if merged:
            merged[-1] = np.concatenate([merged[-1], carry])
        else:
            merged.append(carry)
    return merged


def build_population(K: int = 10, set_size: int = 10_000, L: int = 10, seed: int = 0) -> StrataPopulation:
    strata = []
    for i, vals in enumerate(generate_lognormal_sets(K, set_size, seed), start=1):
        for j, g in enumerate(stratify_values(vals, L), start=1):
            strata.append(Stratum(f"{i}.{j}", int(len(g)), float(np.std(g, ddof=1))))
    return StrataPopulation(tuple(strata))


def sample_size(fraction: float, N: int) -> int:
    """``f * N`` rounded half up."""
    return int(math.floor(fraction * N + 0.5))


def default_lower(N_h: int, S_h: float) -> float:
    return min(2.0, N_h / 2.0)


def default_upper(N_h: int, S_h: float) -> float:
    return float(N_h)


def population_to_problem(pop: StrataPopulation, n: float | None = None, fraction: float | None = None,
                          m_policy: Callable = default_lower,
                          M_policy: Callable = default_upper) -> BoxProblem:
    """STSI allocation problem for ``pop`` with bounds from the two policies.

    Exactly one of ``n`` and ``fraction`` is required; a fraction gives
    ``n = round(fraction * N)``.
    """
    if (n is None) == (fraction is None):
        raise ValueError("give exactly one of n and fraction")
    if n is None:
        n = sample_size(fraction, pop.N)
    A, _ = stsi_coefficients(pop)
    m = [m_policy(st.N, st.S) for st in pop.strata]
    M = [M_policy(st.N, st.S) for st in pop.strata]
    try:
        return BoxProblem(pop.labels, A, m, M, n)
    except InfeasibleProblem:
        raise
    except (TypeError, ValueError) as exc:
        raise InfeasibleProblem(str(exc)) from exc
