import math

import numpy as np
import pytest

from stratalloc.errors import DegenerateRange
from stratalloc.popgen import (
    Stratum,
    StrataPopulation,
    build_population,
    generate_lognormal_sets,
    geometric_stratify,
    lognormal_sigma,
    population_to_problem,
    sample_size,
    stratify_values,
)
from stratalloc.recursive import rnabox
from stratalloc.verify import check_box_optimality


def test_sigma():
    assert lognormal_sigma(1) == pytest.approx(0.6931, abs=5e-5)


def test_deterministic():
    a = generate_lognormal_sets(3, 500, 42)
    b = generate_lognormal_sets(3, 500, 42)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert build_population(K=2, set_size=500, seed=7) == build_population(K=2, set_size=500, seed=7)
    assert not np.array_equal(a[0], generate_lognormal_sets(3, 500, 43)[0])


@pytest.mark.slow
def test_log_median_near_zero():
    # a flat +-0.05 window is narrower than one standard error of the median once
    # sigma = log(1+i) is large, so the bound scales with sigma (4.5 standard errors)
    n = 10_000
    for i, vals in enumerate(generate_lognormal_sets(100, n, 5), start=1):
        se = math.sqrt(math.pi / 2) * lognormal_sigma(i) / math.sqrt(n)
        med = abs(float(np.median(np.log(vals))))
        assert med <= 4.5 * se
        if i <= 3:
            assert med <= 0.05


def test_log_scale_matches_sigma():
    for i, vals in enumerate(generate_lognormal_sets(5, 20_000, 1), start=1):
        assert np.std(np.log(vals)) == pytest.approx(math.log1p(i), rel=0.03)


def test_boundaries():
    assert geometric_stratify([1, 3, 16], 4) == pytest.approx((2, 4, 8), rel=1e-12)
    assert geometric_stratify([1, 50, 100], 2) == pytest.approx((10,), rel=1e-12)


def test_degenerate():
    with pytest.raises(DegenerateRange):
        geometric_stratify([3, 3, 3], 4)


def test_coverage_and_merge():
    for vals in generate_lognormal_sets(10, 3000, 11):
        groups = stratify_values(vals, 10)
        assert len(groups) <= 10
        assert all(len(g) >= 2 for g in groups)
        assert sorted(np.concatenate(groups).tolist()) == sorted(vals.tolist())


def test_merge_small_tail():
    # the top stratum holds one value and is folded into its left neighbour
    vals = np.array([1.0, 1.1, 1.2, 1.3, 100.0])
    groups = stratify_values(vals, 2)
    assert [len(g) for g in groups] == [5]


def test_std_two_pass_oracle():
    pop = build_population(K=2, set_size=3000, L=10, seed=4)
    k = 0
    for vals in generate_lognormal_sets(2, 3000, 4):
        for g in stratify_values(vals, 10):
            mean = math.fsum(g) / len(g)
            sd = math.sqrt(math.fsum((v - mean) ** 2 for v in g) / (len(g) - 1))
            st = pop.strata[k]
            assert st.N == len(g)
            assert st.S == pytest.approx(sd, rel=1e-10)
            k += 1
    assert k == len(pop)


def test_sample_size():
    assert sample_size(0.1, 990403) == 99040
    assert sample_size(0.5, 3) == 2


def test_problem_from_tiny_population():
    pop = StrataPopulation([Stratum("a", 10, 1.0), Stratum("b", 20, 3.0)])
    p = population_to_problem(pop, n=10, m_policy=lambda N, S: 2.0, M_policy=lambda N, S: float(N))
    assert p.m == (2.0, 2.0) and p.M == (10.0, 20.0) and p.A == (10.0, 60.0)


def test_exactly_one_size():
    pop = StrataPopulation([Stratum("a", 10, 1.0), Stratum("b", 20, 3.0)])
    with pytest.raises(ValueError):
        population_to_problem(pop)
    with pytest.raises(ValueError):
        population_to_problem(pop, n=5, fraction=0.1)


def test_desk_end_to_end():
    pop = build_population(K=10, set_size=10_000, L=10, seed=0)
    for f in (0.1, 0.5, 0.9):
        p = population_to_problem(pop, fraction=f)
        alloc, _ = rnabox(p)
        assert check_box_optimality(p, alloc).is_optimal


def test_csv_round_trip(tmp_path):
    pop = build_population(K=2, set_size=500, seed=3)
    path = tmp_path / "pop.csv"
    pop.to_csv(path)
    assert StrataPopulation.from_csv(path) == pop
