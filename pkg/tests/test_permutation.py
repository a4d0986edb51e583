import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predrec import (
    Functional,
    GridDensity,
    InvalidArgument,
    NormalKernel,
    PermutationPlan,
    TabulatedKernel,
    WeightSchedule,
    build_ensemble,
    ensemble_variance,
    make_grid,
    pr_run,
    quantile_interval,
    sample_permutation,
    verify_identity,
)
from predrec.recursion import pr_run_stepwise

GRID = make_grid("lebesgue", 0, 10, 201)
P0 = GridDensity.uniform(GRID)
SCHED = WeightSchedule()
KERNEL = NormalKernel(0.5)
DATA = np.random.default_rng(1).normal(5, 1.5, 40)


def test_sample_permutation_singleton():
    rng = np.random.default_rng(0)
    for _ in range(5):
        np.testing.assert_array_equal(sample_permutation(1, rng), [0])


def test_sample_permutation_uniform():
    rng = np.random.default_rng(12345)
    counts = Counter(tuple(sample_permutation(3, rng)) for _ in range(60000))
    assert len(counts) == 6
    for c in counts.values():
        assert abs(c / 60000 - 1 / 6) <= 0.01


def test_sample_permutation_deterministic():
    a = [sample_permutation(10, r) for r in [np.random.default_rng(9)] * 3]
    b = [sample_permutation(10, r) for r in [np.random.default_rng(9)] * 3]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_plan_validation():
    with pytest.raises(InvalidArgument):
        PermutationPlan(M=1)
    with pytest.raises(InvalidArgument):
        PermutationPlan(M=10, rng_seed=-1)
    assert PermutationPlan().M == 200


def test_plan_orders_are_keyed_by_replicate():
    plan = PermutationPlan(M=6, rng_seed=77)
    orders = plan.orders(15)
    np.testing.assert_array_equal(orders[0], np.arange(15))
    for m in range(1, 6):
        np.testing.assert_array_equal(orders[m], plan.replicate_rng(m).permutation(15))
    no_id = PermutationPlan(M=6, rng_seed=77, include_identity=False).orders(15)
    np.testing.assert_array_equal(no_id[1:], orders[1:])


def test_ensemble_singleton_data():
    e = build_ensemble([4.2], P0, SCHED, KERNEL, Functional.cdf_at(4), PermutationPlan(10, 3))
    assert np.all(e.values == e.values[0])


def test_ensemble_custom_ones():
    psi = Functional.custom(np.ones(GRID.size))
    e = build_ensemble(DATA, P0, SCHED, KERNEL, psi, PermutationPlan(30, 3))
    np.testing.assert_allclose(e.values, 1.0, atol=1e-10)


def test_ensemble_reproducible_and_contains_original():
    psi = Functional.cdf_at(5)
    plan = PermutationPlan(25, 2024)
    a = build_ensemble(DATA, P0, SCHED, KERNEL, psi, plan)
    b = build_ensemble(DATA, P0, SCHED, KERNEL, psi, plan)
    assert a.values.tobytes() == b.values.tobytes()
    original = psi.evaluate(GRID, pr_run(DATA, P0, SCHED, KERNEL).density.values)
    assert original in a.values
    assert a.values.size == 25 and np.all(np.isfinite(a.values))


def test_ensemble_members_match_single_runs():
    plan = PermutationPlan(5, 8)
    e = build_ensemble(DATA, P0, SCHED, KERNEL, Functional.mean(), plan, keep_densities=True)
    for m in range(5):
        order = e.orders[m]
        ref = pr_run_stepwise(DATA[order], P0, SCHED, KERNEL)
        np.testing.assert_allclose(e.densities[m], ref.density.values, rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(e.mean_density().values, e.densities.mean(axis=0), rtol=1e-15)


def test_ensemble_variance_examples():
    assert ensemble_variance(np.full(7, 0.3)) == 0.0
    assert ensemble_variance(np.array([0.0, 1.0])) == pytest.approx(0.5)
    with pytest.raises(InvalidArgument):
        ensemble_variance(np.array([1.0]))


def test_quantile_interval_ranks():
    iv = quantile_interval(np.arange(1, 201, dtype=float)[::-1], 0.95)
    assert (iv.lower, iv.upper) == (5, 195)
    assert iv.point == pytest.approx(100.5)
    iv = quantile_interval(np.arange(1, 6, dtype=float), 0.5)
    assert (iv.lower, iv.upper) == (2, 4)
    iv = quantile_interval(np.full(9, 2.5), 0.9)
    assert (iv.lower, iv.upper) == (2.5, 2.5)
    iv = quantile_interval(np.array([3.0, 1.0]), 0.95)
    assert (iv.lower, iv.upper) == (1.0, 3.0)


@pytest.mark.parametrize("level", [0, 1, -0.5, 1.5])
def test_quantile_interval_bad_level(level):
    with pytest.raises(InvalidArgument):
        quantile_interval(np.arange(10.0), level)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=300),
       st.floats(0.01, 0.98), st.floats(0.001, 0.5))
def test_quantile_interval_properties(values, level, extra):
    v = np.asarray(values)
    a = quantile_interval(v, level)
    b = quantile_interval(v, min(level + extra, 0.999))
    assert a.lower in v and a.upper in v
    assert a.lower <= a.upper
    assert b.lower <= a.lower and b.upper >= a.upper


# --- exhaustive identity oracle ------------------------------------------

COUNT2 = make_grid("counting", points=[0.0, 1.0])
TABLE = TabulatedKernel([[0.2, 0.8], [0.8, 0.2]])


def brute_force(probs, n, p0, schedule, kernel, psi):
    """Direct enumeration with the step-by-step route and plain Python sums."""
    grid = p0.grid
    rows = []  # (prob, [psi over all orderings]) with the identity first
    for d in itertools.product(range(len(probs)), repeat=n):
        pr = math.prod(probs[y] for y in d)
        vals = []
        for perm in itertools.permutations(range(n)):
            run = pr_run_stepwise(np.array([d[i] for i in perm], float), p0, schedule, kernel)
            vals.append(float(psi.evaluate(grid, run.density.values)))
        rows.append((pr, vals))
    n_perm = math.factorial(n)
    mean0 = sum(pr * v[0] for pr, v in rows)
    var0 = sum(pr * (v[0] - mean0) ** 2 for pr, v in rows)
    meanj = sum(pr * x / n_perm for pr, v in rows for x in v)
    varj = sum(pr / n_perm * (x - meanj) ** 2 for pr, v in rows for x in v)
    return var0, varj


def test_identity_small_example():
    p0 = GridDensity(COUNT2, [0.5, 0.5])
    psi = Functional.density_at(1)
    rep = verify_identity([0.5, 0.5], 2, p0, SCHED, TABLE, psi)
    assert rep.identity_gap <= 1e-12
    assert rep.decomposition_gap <= 1e-12
    var0, varj = brute_force([0.5, 0.5], 2, p0, SCHED, TABLE, psi)
    assert rep.sampling_variance == pytest.approx(var0, abs=1e-14)
    assert rep.joint_variance == pytest.approx(varj, abs=1e-14)
    assert rep.sampling_variance > 0
    assert rep.mean_conditional_variance > 0


def test_identity_singleton():
    p0 = GridDensity(COUNT2, [0.3, 0.7])
    rep = verify_identity([0.4, 0.6], 1, p0, SCHED, TABLE, Functional.density_at(0))
    assert rep.identity_gap == 0.0
    assert rep.mean_conditional_variance == 0.0


def test_identity_skewed_three_outcomes():
    g = make_grid("counting", points=[0.0, 1.0, 2.0])
    table = np.array([[0.7, 0.2, 0.1], [0.2, 0.5, 0.3], [0.1, 0.3, 0.6]])
    p0 = GridDensity(g, [0.2, 0.5, 0.3])
    probs = [0.5, 0.3, 0.2]
    psi = Functional.cdf_at(1)
    rep = verify_identity(probs, 3, p0, WeightSchedule(0.9), TabulatedKernel(table), psi)
    var0, varj = brute_force(probs, 3, p0, WeightSchedule(0.9), TabulatedKernel(table), psi)
    assert rep.identity_gap <= 1e-12 and rep.decomposition_gap <= 1e-12
    assert rep.joint_variance == pytest.approx(varj, abs=1e-14)
    assert rep.sampling_variance == pytest.approx(var0, abs=1e-14)


def test_identity_budget():
    g = make_grid("counting", G=3)
    with pytest.raises(InvalidArgument):
        verify_identity(np.full(10, 0.1), 6, GridDensity.uniform(g), SCHED,
                        TabulatedKernel(np.full((10, 3), 0.1)), Functional.mean())
    with pytest.raises(InvalidArgument):
        verify_identity([0.5, 0.5], 2, P0, SCHED, TABLE, Functional.mean())
