"""Timing harness: median wall time, iteration counts and strata-type counts per (algorithm, fraction)."""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ProcessPoolExecutor

from .allocore import objective
from .fpia import FpiaStatus, bisection_solve, fpia_solve
from .popgen import population_to_problem
from .recursive import rnabox, rnabox_twin

BENCH_ALGORITHMS = ("rnabox", "rnabox-twin", "fpia", "bisection")
DEFAULT_FRACTIONS = tuple(round(0.1 * k, 1) for k in range(1, 10))
AGREEMENT_TOL = 1e-8


def _counts_from_x(p, x):
    n_min = sum(1 for v, lo in zip(x, p.m) if v == lo)
    n_max = sum(1 for v, hi in zip(x, p.M) if v == hi)
    return {"min": n_min, "neyman": len(x) - n_min - n_max, "max": n_max}


def _run_once(algorithm, p):
    if algorithm == "rnabox":
        alloc, trace = rnabox(p, want_trace=True)
        iters = [rec.rna_inner_iters for rec in trace.iterations]
        return "ok", alloc.x, alloc.counts, iters
    if algorithm == "rnabox-twin":
        alloc = rnabox_twin(p)
        return "ok", alloc.x, alloc.counts, None
    if algorithm == "fpia":
        out = fpia_solve(p)
        if out.status is not FpiaStatus.CONVERGED:
            return out.status.value, None, None, out.iterations
        return "ok", out.allocation, _counts_from_x(p, out.allocation), out.iterations
    if algorithm == "bisection":
        x, its = bisection_solve(p, return_iterations=True)
        return "ok", x, _counts_from_x(p, x), its
    raise ValueError(f"unknown benchmark algorithm {algorithm!r}")


def bench_cell(pop, algorithm, fraction, repeats):
    p = population_to_problem(pop, fraction=fraction)
    times = []
    result = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        result = _run_once(algorithm, p)
        times.append(time.perf_counter() - t0)
    status, x, counts, iters = result
    ref = bisection_solve(p)
    f_ref = objective(p, ref)
    f = objective(p, x) if x is not None else None
    rel = abs(f - f_ref) / f_ref if f is not None else None
    return {
        "algorithm": algorithm,
        "fraction": fraction,
        "n": p.n,
        "status": status,
        "median_seconds": statistics.median(times),
        "repeats": len(times),
        "iterations": iters,
        "counts": counts,
        "objective": f,
        "objective_rel_diff_vs_bisection": rel,
        "agrees_with_bisection": rel is not None and rel <= AGREEMENT_TOL,
    }


def _cell(args):
    return bench_cell(*args)


def run_bench(pop, fractions=DEFAULT_FRACTIONS, algorithms=("rnabox", "fpia"), repeats=10,
              parallel=False) -> dict:
    """Benchmark every (algorithm, fraction) cell.

    Cells run sequentially unless ``parallel`` is set; repeats within a
    cell always run back to back.
    """
    for a in algorithms:
        if a not in BENCH_ALGORITHMS:
            raise ValueError(f"unknown benchmark algorithm {a!r}")
    jobs = [(pop, a, f, repeats) for a in algorithms for f in fractions]
    if parallel:
        with ProcessPoolExecutor() as ex:
            rows = list(ex.map(_cell, jobs))
    else:
        rows = [_cell(j) for j in jobs]
    return {
        "population": {"strata": len(pop), "N": pop.N},
        "fractions": list(fractions),
        "algorithms": list(algorithms),
        "repeats": repeats,
        "rows": rows,
    }
