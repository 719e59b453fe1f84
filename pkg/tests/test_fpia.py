import math

import numpy as np
import pytest

from instances import TABLE1, TABLE6, TABLE7, problem, random_instances
from stratalloc.allocore import BoxProblem, set_function_s
from stratalloc.errors import NonPositiveLambda
from stratalloc.fpia import (
    FpiaStatus,
    bisection_solve,
    default_lambda0,
    fpia_solve,
    g_tilde,
    lambda_partition,
    phi,
    x_of_lambda,
)
from stratalloc.recursive import rnabox


class TestXOfLambda:
    def test_table7_optimum(self):
        assert x_of_lambda(problem(TABLE7), 841) == pytest.approx((13.10, 10, 10, 46.90), abs=0.005)

    def test_table6_optimum(self):
        assert x_of_lambda(problem(TABLE6), 8798.44) == pytest.approx((44.35, 5, 5.65, 5), abs=0.005)

    def test_small_lambda_gives_upper_bounds(self):
        p = problem(TABLE1)
        lam = 0.5 * min((a / hi) ** 2 for a, hi in zip(p.A, p.M))
        assert x_of_lambda(p, lam) == p.M

    def test_nonpositive(self):
        with pytest.raises(NonPositiveLambda):
            x_of_lambda(problem(TABLE7), 0.0)

    def test_monotone_in_lambda(self):
        rng = np.random.default_rng(0)
        for p in random_instances(seed=1, count=300):
            a, b = sorted(rng.lognormal(0, 3, 2))
            xa, xb = x_of_lambda(p, a), x_of_lambda(p, b)
            assert all(u >= v for u, v in zip(xa, xb))

    def test_partition_covers(self):
        p = problem(TABLE7)
        lp = lambda_partition(p, 841)
        assert lp.J_M | lp.J_m | lp.J == set(p.labels)
        assert lp.J_m == {2, 3} and lp.J == {1, 4}


class TestGTilde:
    def test_table7_root(self):
        assert abs(g_tilde(problem(TABLE7), 841)) <= 1e-9

    def test_saturation(self):
        p = problem(TABLE1)
        lam = 0.5 * min((a / hi) ** 2 for a, hi in zip(p.A, p.M))
        assert g_tilde(p, lam) == pytest.approx(sum(p.M) - p.n, abs=1e-9)

    def test_monotone_on_grid(self):
        for p in random_instances(seed=2, count=50):
            lo = min((a / hi) ** 2 for a, hi in zip(p.A, p.M)) * 0.5
            hi = max((a / m) ** 2 for a, m in zip(p.A, p.m)) * 2
            grid = np.geomspace(lo, hi, 1000)
            vals = [g_tilde(p, lam) for lam in grid]
            assert all(a >= b - 1e-9 for a, b in zip(vals, vals[1:]))


class TestFpia:
    def test_table6_blocked(self):
        out = fpia_solve(problem(TABLE6), lambda0=6861.36)
        assert out.status is FpiaStatus.BLOCKED
        assert out.allocation is None
        # the blocking partition has s == 0
        lp = lambda_partition(problem(TABLE6), out.lambda_history[-1])
        assert set_function_s(problem(TABLE6), (lp.J_m, lp.J_M)) == 0

    def test_table7_oscillates(self):
        out = fpia_solve(problem(TABLE7), lambda0=695.64)
        assert out.status is FpiaStatus.OSCILLATING
        assert out.lambda_history[1] == pytest.approx(1444, abs=0.005)
        assert out.lambda_history[2] == pytest.approx(739.84, abs=0.005)

    def test_table1_default_start_is_blocked(self):
        # at the Neyman ratio every stratum lies outside its box, so the map is undefined
        p = problem(TABLE1)
        out = fpia_solve(p)
        assert out.status is FpiaStatus.BLOCKED
        lp = out.partitions[0]
        assert lp.J_m | lp.J_M == set(p.labels)

    def test_table1_converges_near_optimum(self):
        p = problem(TABLE1)
        alloc, _ = rnabox(p)
        lam_star = 1 / set_function_s(p, alloc.partition) ** 2
        out = fpia_solve(p, lambda0=lam_star * 1.01)
        assert out.status is FpiaStatus.CONVERGED
        assert out.allocation == pytest.approx(alloc.x, abs=1e-9)

    def test_default_start(self):
        p = problem(TABLE1)
        assert default_lambda0(p) == pytest.approx(1 / set_function_s(p, ((), ())) ** 2, rel=1e-14)

    def test_converged_outputs_are_feasible(self):
        hits = 0
        for p in random_instances(seed=3, count=2000, k_max=10):
            out = fpia_solve(p)
            if out.status is not FpiaStatus.CONVERGED:
                continue
            hits += 1
            x = out.allocation
            assert all(lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12) for v, lo, hi in zip(x, p.m, p.M))
            assert abs(math.fsum(x) - p.n) <= 1e-9 * p.n
        assert hits > 500

    def test_fixed_point_at_optimum(self):
        for p in random_instances(seed=4, count=1000, k_max=10):
            alloc, _ = rnabox(p)
            if alloc.kind.value != "regular":
                continue
            lam = 1 / set_function_s(p, alloc.partition) ** 2
            f = phi(p, lam)
            assert f is not None
            assert abs(f - lam) <= 1e-9 * lam

    def test_max_iterations_status(self):
        p = problem(TABLE1)
        lam_star = 1 / set_function_s(p, rnabox(p)[0].partition) ** 2
        out = fpia_solve(p, lambda0=lam_star * 1.01, max_iter=1)
        assert out.status is FpiaStatus.MAX_ITERATIONS
        assert len(out.lambda_history) == 2

    def test_negative_s_is_blocked(self):
        p = BoxProblem([1, 2, 3], [10, 10, 1], [5, 5, 5], [50, 50, 50], 60)
        lp = lambda_partition(p, 0.01)
        assert lp.J_M == {1, 2} and lp.J == {3}
        assert set_function_s(p, (lp.J_m, lp.J_M)) < 0
        assert phi(p, 0.01) is None
        out = fpia_solve(p, lambda0=0.01)
        assert out.status is FpiaStatus.BLOCKED


class TestBisection:
    def test_table1(self):
        x = bisection_solve(problem(TABLE1))
        assert x == pytest.approx((750, 450, 261.08, 350, 198.92, 550, 650, 100, 850, 950), abs=0.005)

    def test_upper_vertex(self):
        p = BoxProblem([1, 2, 3], [5, 1, 2], [1, 1, 1], [4, 6, 8], 18)
        assert bisection_solve(p) == (4.0, 6.0, 8.0)

    def test_lower_vertex(self):
        p = BoxProblem([1, 2, 3], [5, 1, 2], [1, 2, 3], [4, 6, 8], 6)
        assert bisection_solve(p) == (1.0, 2.0, 3.0)

    def test_tolerance_stops_early(self):
        p = problem(TABLE1)
        _, loose = bisection_solve(p, tol=1.0, return_iterations=True)
        _, tight = bisection_solve(p, return_iterations=True)
        assert loose < tight
