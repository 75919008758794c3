import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adhesion1d.measures import (DiscreteMeasure, MassVelocityState, PiecewiseLinearCost,
                                 PowerCost, d_dist, discretize, measure_of, pseudo_norm,
                                 quantile, transport_cost, u_dist, wasserstein,
                                 weak_discrepancy)
from adhesion1d.scenario import random_state
from adhesion1d.stepfn import StepFn, lp_distance

from oracles import transport_lp


def small_measures(grid=(0.0, 1.0, 2.0), sixths=6):
    """Every measure with at most 3 atoms on ``grid`` and masses in 1/6 steps."""
    out = []
    for k in (1, 2, 3):
        for pos in itertools.combinations(grid, k):
            for cuts in itertools.combinations(range(1, sixths), k - 1):
                parts = np.diff((0,) + cuts + (sixths,)) / sixths
                out.append(DiscreteMeasure(parts, pos))
    return out


def test_quantile_examples():
    assert quantile(DiscreteMeasure.dirac(0.0)) == StepFn.constant(0.0)
    q = quantile(DiscreteMeasure([0.5, 0.5], [0.0, 1.0]))
    np.testing.assert_array_equal(q.breakpoints, [0, 0.5, 1])
    np.testing.assert_array_equal(q.values, [0, 1])


def test_measure_of_examples():
    rho = measure_of(StepFn.constant(0.0))
    assert rho.positions.tolist() == [0.0] and rho.masses.tolist() == [1.0]
    rho = measure_of(StepFn([0, 0.25, 0.5, 1], [1.0, 1.0, 3.0], canonical=False))
    assert rho.positions.tolist() == [1.0, 3.0]
    np.testing.assert_allclose(rho.masses, [0.5, 0.5])
    with pytest.raises(ValueError):
        measure_of(StepFn([0, 0.5, 1], [1.0, 0.0]))


@given(st.integers(1, 8), st.integers(0, 2 ** 32))
def test_quantile_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.dirichlet(np.ones(n))
    rho = DiscreteMeasure(m, rng.normal(size=n))
    back = measure_of(quantile(rho))
    np.testing.assert_allclose(back.positions, rho.positions, rtol=0, atol=0)
    np.testing.assert_allclose(back.masses, rho.masses, atol=1e-15)


def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([0.5, 0.4], [0, 1])
    with pytest.raises(ValueError):
        DiscreteMeasure([1.5, -0.5], [0, 1])
    with pytest.raises(ValueError):
        DiscreteMeasure([1.0], [math.nan])
    merged = MassVelocityState([0.25, 0.25, 0.5], [1.0, 0.0, 1.0], [2.0, 5.0, -1.0])
    assert merged.positions.tolist() == [0.0, 1.0]
    np.testing.assert_allclose(merged.velocities, [5.0, 0.0])


def test_pushforward_identity_polynomials(rng):
    for _ in range(20):
        s = random_state(rng, 12, 1)
        X = s.quantile()
        for k in range(5):
            lhs = s.measure.integrate(lambda x: x ** k)
            rhs = X.map(lambda v: v ** k).integral()
            assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-15)


def test_wasserstein_examples():
    for p in (1, 2, 4, math.inf):
        assert wasserstein(DiscreteMeasure.dirac(0), DiscreteMeasure.dirac(1), p) == 1.0
    two = DiscreteMeasure([0.5, 0.5], [0.0, 1.0])
    half = DiscreteMeasure.dirac(0.5)
    assert wasserstein(two, half, 2) == pytest.approx(0.5, abs=1e-15)
    assert wasserstein(two, two, 3) == 0.0
    assert transport_lp(two.masses, two.positions, half.masses, half.positions,
                        lambda r: r ** 2) == pytest.approx(0.25, abs=1e-12)


def test_monotone_coupling_matches_linear_program():
    ms = small_measures()
    costs = [("p1", PowerCost(1)), ("p2", PowerCost(2)), ("r4", PowerCost(4)),
             ("pl", PiecewiseLinearCost([(0, 0), (0.5, 0.1), (1.0, 0.6), (2.0, 2.0)]))]
    for a, b in itertools.product(ms, ms[::3]):
        for _, psi in costs:
            ref = transport_lp(a.masses, a.positions, b.masses, b.positions, psi)
            assert transport_cost(a, b, psi) == pytest.approx(ref, abs=1e-9)


def test_transport_cost_examples():
    two = DiscreteMeasure([0.5, 0.5], [0.0, 1.0])
    half = DiscreteMeasure.dirac(0.5)
    assert transport_cost(two, half, PowerCost(2)) == pytest.approx(wasserstein(two, half) ** 2)
    assert transport_cost(two, half, PiecewiseLinearCost([(0.0, 0.0)])) == 0.0
    assert transport_cost(two, half, PowerCost(4)) == pytest.approx(1 / 16, abs=1e-15)
    with pytest.raises(ValueError):
        PowerCost(0.5)
    with pytest.raises(ValueError):
        PiecewiseLinearCost([(0, 0), (1, 2), (2, 3)])
    with pytest.raises(TypeError):
        transport_cost(two, half, lambda r: r ** 2)


def test_u_dist_examples():
    a = MassVelocityState([0.5, 0.5], [0.0, 1.0], [1.0, -1.0])
    assert u_dist(a, a) == 0.0 and d_dist(a, a) == 0.0
    shifted = MassVelocityState(a.masses, a.positions, a.velocities + 0.3)
    for p in (1, 2, 4):
        assert u_dist(a, shifted, p) == pytest.approx(0.3, rel=1e-14)
    one = MassVelocityState([1.0], [0.5], [0.5])
    # cells [0,.5) and [.5,1): |1 - .5| and |-1 - .5|
    assert u_dist(a, one, 1) == pytest.approx(0.5 * 0.5 + 0.5 * 1.5)
    assert u_dist(a, one, 2) == pytest.approx(math.sqrt(0.5 * 0.25 + 0.5 * 2.25))
    assert d_dist(a, one, 2) == pytest.approx(math.sqrt(0.25 + 0.5 * 0.25 + 0.5 * 2.25))
    assert pseudo_norm(a, 2) == pytest.approx(math.sqrt(0.5 * 1 + 0.5 * 2))
    with pytest.raises(ValueError):
        u_dist(a, a, math.inf)


def test_d_dist_triangle_inequality(rng):
    for _ in range(300):
        a, b, c = (random_state(rng, 8, 1) for _ in range(3))
        for p in (1, 2, 4):
            assert d_dist(a, c, p) <= d_dist(a, b, p) + d_dist(b, c, p) + 1e-12


def test_discretize_examples():
    s = discretize(lambda w: w, 2)
    np.testing.assert_allclose(s.positions, [0.25, 0.75])
    np.testing.assert_allclose(s.masses, [0.5, 0.5])
    base = MassVelocityState(np.full(4, 0.25), [0.0, 1.0, 2.0, 3.0], [1.0, 0.0, -1.0, 2.0])
    X, V = base.lagrangian()
    again = discretize(X, 4, V, velocity_in="w")
    np.testing.assert_array_equal(again.positions, base.positions)
    np.testing.assert_array_equal(again.velocities, base.velocities)
    with pytest.raises(ValueError):
        discretize(lambda w: 1 - w, 3)


def test_discretize_refinement_halves_sup_error():
    src = lambda w: w ** 2  # Lipschitz quantile  # noqa: E731
    fine = (np.arange(1 << 16) + 0.5) / (1 << 16)
    errs = []
    for N in (8, 16, 32, 64):
        q = discretize(src, N).quantile()
        errs.append(np.max(np.abs(q(fine) - src(fine))))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.8 < r < 2.2 for r in ratios), ratios


def test_weak_surrogate_converges_under_refinement():
    src = lambda w: np.tan(np.pi * (w - 0.5)) * 0.2  # noqa: E731
    vel = np.sin
    ref = discretize(src, 4096, vel)
    gaps = [weak_discrepancy(discretize(src, N, vel), ref) for N in (16, 64, 256)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_state_csv_round_trip(tmp_path):
    s = MassVelocityState([0.1, 0.2, 0.7], [0.0, 0.3, 1.0], [1.0, math.nan, -1.0])
    back = MassVelocityState.loads(s.dumps())
    np.testing.assert_array_equal(back.positions, s.positions)
    assert math.isnan(back.velocities[1])
    p = tmp_path / "s.csv"
    s.to_csv(p)
    assert MassVelocityState.from_csv(p).dumps() == s.dumps()


def test_state_csv_validation():
    with pytest.raises(ValueError, match="header"):
        MassVelocityState.loads("0.5,0,1\n0.5,1,0\n")
    off = "m,x,v\n0.5,0,1\n0.499999,1,0\n"
    with pytest.raises(ValueError, match="sum"):
        MassVelocityState.loads(off)
    s = MassVelocityState.loads(off, renormalize=True)
    assert float(s.masses.sum()) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        MassVelocityState.loads("m,x,v\n1.0,0\n")
