"""Acceptance criteria AC1-AC9; the terminal summary prints one PASS/FAIL line per criterion."""

import json
import math
import time

import numpy as np
import pytest

from instances import TABLE1, TABLE2, TABLE3, TABLE6, TABLE7, problem, random_instances
from stratalloc import cli
from stratalloc.allocore import Allocation, Kind, Partition, objective, set_function_s
from stratalloc.fpia import FpiaStatus, bisection_solve, fpia_solve
from stratalloc.popgen import build_population, population_to_problem
from stratalloc.recursive import naive_rna_box, rnabox, rnabox_twin
from stratalloc.roundalloc import round_preserve_sum
from stratalloc.verify import audit_trace, check_box_optimality, oracle_enumerate


def _as_alloc(p, x, part):
    kind = Kind.VERTEX if part.covers(p) else Kind.REGULAR
    return Allocation(p.labels, tuple(float(v) for v in x), part, kind, objective(p, x))


# ---------------------------------------------------------------- AC1

T1_X = (750, 450, 261.08, 350, 198.92, 550, 650, 100, 850, 950)
T1_TRACE = [
    (set(), {8, 5, 3, 7, 4, 6, 9, 2}),
    ({10}, {8, 5, 3, 7, 4, 6, 9}),
    ({10, 1, 2}, {8, 5, 3, 7, 4, 6}),
    ({10, 1, 2, 9}, {8, 5, 3}),
    ({10, 1, 2, 9, 6}, {8, 5, 3}),
    ({10, 1, 2, 9, 6, 4, 7}, {8}),
]
T1_S = (0.3, 0.204, 0.122, 0.0803, 0.075, 0.0622)


@pytest.mark.criterion(1, "table1: golden optimum, sets and trace")
def test_ac1_table1():
    p = problem(TABLE1)
    alloc, trace = rnabox(p, want_trace=True)
    assert alloc.x == pytest.approx(T1_X, abs=0.005)
    assert alloc.objective == pytest.approx(441591.5, abs=0.5)
    assert alloc.partition.L == {1, 2, 4, 6, 7, 9, 10}
    assert alloc.partition.U == {8}
    assert trace.r_star == 6
    assert [(set(r.L), set(r.U)) for r in trace.iterations] == T1_TRACE
    for got, want in zip(trace.s_sequence, T1_S):
        assert float(f"{got:.3g}") == want

    reps = 200
    t0 = time.perf_counter()
    for _ in range(reps):
        rnabox(p)
    per_call = (time.perf_counter() - t0) / reps
    print(f"\nAC1 rnabox table1 runtime: {per_call * 1e6:.1f} us")
    assert per_call < 1e-3


# ---------------------------------------------------------------- AC2

@pytest.mark.criterion(2, "table2: naive recursion rejected, rnabox optimal")
def test_ac2_table2():
    p = problem(TABLE2)
    bad = naive_rna_box(p)
    assert bad.x == pytest.approx((30, 88, 1344, 22, 5), abs=1e-9)
    assert objective(p, bad.x) == pytest.approx(20360, abs=0.5)
    rep = check_box_optimality(p, _as_alloc(p, bad.x, bad.partition))
    assert not rep.is_optimal
    assert 2 in {v.label for v in rep.violations}

    alloc, _ = rnabox(p)
    assert alloc.x == pytest.approx((54.44, 45.63, 1344, 39.93, 5), abs=0.005)
    assert alloc.objective == pytest.approx(17091, abs=1)


# ---------------------------------------------------------------- AC3

@pytest.mark.criterion(3, "table3: reciprocal take-min violation")
def test_ac3_table3():
    p = problem(TABLE3)
    alloc, _ = rnabox(p)
    assert alloc.x == pytest.approx((50, 110), abs=1e-9)
    rep = check_box_optimality(p, _as_alloc(p, (30, 130), Partition({1})))
    assert not rep.is_optimal
    hits = [v for v in rep.violations if v.label == 1 and v.condition == "take_min_reciprocal"]
    assert hits
    v = hits[0]
    assert v.lhs == pytest.approx(66.67, abs=0.005)
    assert v.rhs == pytest.approx(23.08, abs=0.005)


# ---------------------------------------------------------------- AC4

@pytest.mark.criterion(4, "table6: fixed-point iteration blocked")
def test_ac4_table6():
    p = problem(TABLE6)
    out = fpia_solve(p, lambda0=6861.36)
    assert out.status is FpiaStatus.BLOCKED
    alloc, _ = rnabox(p)
    assert alloc.x == pytest.approx((44.35, 5, 5.65, 5), abs=0.005)
    s = set_function_s(p, alloc.partition)
    assert 1 / s**2 == pytest.approx(8798.44, abs=0.05)


# ---------------------------------------------------------------- AC5

@pytest.mark.criterion(5, "table7: fixed-point iteration oscillates")
def test_ac5_table7():
    p = problem(TABLE7)
    out = fpia_solve(p, lambda0=695.64)
    assert out.status is FpiaStatus.OSCILLATING
    tail = out.lambda_history[1:]
    assert len(tail) >= 3
    for i, lam in enumerate(tail):
        assert lam == pytest.approx(1444 if i % 2 == 0 else 739.84, abs=0.005)
    alloc, _ = rnabox(p)
    assert alloc.x == pytest.approx((13.1, 10, 10, 46.9), abs=0.05)
    s = set_function_s(p, alloc.partition)
    assert 1 / s**2 == pytest.approx(841, abs=0.01)


# ---------------------------------------------------------------- AC6

@pytest.mark.criterion(6, "Oracle equivalence on 10^4 random instances")
def test_ac6_oracle_equivalence():
    t0 = time.perf_counter()
    count = 0
    for p in random_instances(seed=2024, count=10_000, k_min=1, k_max=8, boundary_share=0.02):
        alloc, _ = rnabox(p)
        x = np.asarray(alloc.x)
        for other in (rnabox_twin(p).x, bisection_solve(p), oracle_enumerate(p).x):
            assert np.max(np.abs(x - np.asarray(other))) <= 1e-8
        assert check_box_optimality(p, alloc).is_optimal
        count += 1
    elapsed = time.perf_counter() - t0
    print(f"\nAC6 {count} instances in {elapsed:.1f} s")
    assert count == 10_000
    assert elapsed < 60


# ---------------------------------------------------------------- AC7

@pytest.mark.criterion(7, "Trace audit on 10^4 random traces")
def test_ac7_trace_audit():
    rng = np.random.default_rng(77)
    from instances import random_box_problem

    for _ in range(10_000):
        k = int(rng.integers(1, 31))
        p = random_box_problem(rng, k)
        _, trace = rnabox(p, want_trace=True)
        assert audit_trace(trace, n_strata=k) == []
        assert trace.r_star <= k + 1


# ---------------------------------------------------------------- AC8

@pytest.mark.criterion(8, "Sum-preserving rounding")
def test_ac8_rounding():
    rng = np.random.default_rng(8)
    for _ in range(10_000):
        k = int(rng.integers(1, 40))
        w = rng.uniform(0, 1, k)
        n = int(rng.integers(0, 5000))
        x = w / w.sum() * n
        xi = round_preserve_sum(x, n)
        assert sum(xi) == n
        assert all(abs(a - b) < 1 for a, b in zip(xi, x))

    pop = build_population(K=10, set_size=10_000, L=10, seed=1)
    for f in [round(0.1 * k, 1) for k in range(1, 10)]:
        p = population_to_problem(pop, fraction=f)
        alloc, _ = rnabox(p)
        xi = round_preserve_sum(alloc.x, int(p.n))
        ratio = objective(p, xi) / alloc.objective
        assert ratio <= 1 + 1e-4, (f, ratio)


# ---------------------------------------------------------------- AC9

@pytest.mark.criterion(9, "Benchmark harness take-min / take-max monotonicity")
def test_ac9_bench(tmp_path, capsys):
    out = tmp_path / "bench.json"
    code = cli.main(["bench", "--K", "10", "--set-size", "10000", "--seed", "1",
                     "--algorithms", "rnabox", "--repeats", "1", "-o", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    rows = sorted(report["rows"], key=lambda r: r["fraction"])
    assert [r["fraction"] for r in rows] == [round(0.1 * k, 1) for k in range(1, 10)]
    mins, maxs = [], []
    for r in rows:
        assert r["status"] == "ok"
        assert isinstance(r["iterations"], list) and r["iterations"]
        assert all(isinstance(v, int) and v >= 1 for v in r["iterations"])
        assert set(r["counts"]) == {"min", "neyman", "max"}
        assert sum(r["counts"].values()) == report["population"]["strata"]
        assert r["agrees_with_bisection"]
        mins.append(r["counts"]["min"])
        maxs.append(r["counts"]["max"])
    assert all(a >= b for a, b in zip(mins, mins[1:])), mins
    assert all(a <= b for a, b in zip(maxs, maxs[1:])), maxs
    assert not math.isnan(rows[0]["median_seconds"])
