import math

import numpy as np
import pytest
from hypothesis import given, settings

from adhesion1d import _kernels
from adhesion1d.cone import (PlateauSet, in_cone, in_polar_cone, in_subdifferential,
                             minimal_selection, omega, proj_h, proj_k, random_subgradient,
                             subdifferential_violation)
from adhesion1d.stepfn import StepFn, common_values, lp_distance
from adhesion1d.verify import contraction_slack, hull_derivative, projection_checks, random_monotone, random_stepfn

from conftest import step_fns
from oracles import qp_projection

# frozen outputs of the block-enumeration oracle
ORACLE_CASES = [
    ([1 / 3, 1 / 3, 1 / 3], [3.0, 1.0, 2.0], [2.0, 2.0, 2.0]),
    ([0.5, 0.5], [1.0, 0.0], [0.5, 0.5]),
    ([0.2, 0.3, 0.5], [1.0, -1.0, 0.5], [-0.2, -0.2, 0.5]),
]


@pytest.mark.parametrize("widths, values, expected", ORACLE_CASES)
def test_proj_k_frozen_oracle_values(widths, values, expected):
    f = StepFn.from_widths(widths, values, canonical=False)
    g = proj_k(f)
    np.testing.assert_allclose(g.on(f.partition), expected, atol=1e-15)
    np.testing.assert_allclose(qp_projection(widths, values), expected, atol=1e-15)


def test_proj_k_fixed_point_and_examples():
    f = StepFn([0, 0.3, 1], [-1.0, 2.0])
    assert proj_k(f) == f
    assert proj_k(StepFn.indicator(0, 0.5)) == StepFn.constant(0.5)


@settings(max_examples=300)
@given(step_fns(max_cells=9))
def test_proj_k_matches_block_enumeration(f):
    g = proj_k(f)
    ref = qp_projection(f.widths, f.values)
    np.testing.assert_allclose(g.on(f.partition), ref, atol=1e-9)
    assert in_cone(g)


@settings(max_examples=200)
@given(step_fns(max_cells=30))
def test_proj_k_is_hull_derivative(f):
    g = proj_k(f)
    assert lp_distance(g, hull_derivative(f), math.inf) <= 1e-9 * (1 + f.sup_norm())


def test_projection_checks_on_random_cases(rng):
    for _ in range(200):
        f = random_stepfn(rng, int(rng.integers(1, 25)))
        c = projection_checks(f, rng)
        scale = 1e-9 * (1 + f.sup_norm() ** 2)
        assert c["dual_route"] <= scale
        assert c["variational"] <= scale
        assert c["complementarity"] <= scale
        assert c["decomposition"] <= scale
        assert c["in_cone"] == 0.0 and c["plateaus"] == 0.0


def test_contraction(rng):
    for _ in range(300):
        f = random_stepfn(rng, int(rng.integers(1, 20)))
        h = random_stepfn(rng, int(rng.integers(1, 20)))
        assert contraction_slack(f, h) <= 1e-10


@pytest.mark.skipif("cython" not in _kernels.available_backends(), reason="extension not built")
def test_backends_agree(rng):
    for n in (1, 2, 5, 100, 5000):
        f = random_stepfn(rng, n)
        a = proj_k(f, backend="python")
        b = proj_k(f, backend="cython")
        assert a == b


def test_omega_examples():
    assert omega(StepFn.constant(3.0)).intervals == [(0.0, 1.0)]
    f = StepFn([0, 0.3, 0.7, 1], [1.0, 2.0, 0.0])
    assert omega(f).intervals == [(0.0, 0.3), (0.3, 0.7), (0.7, 1.0)]
    # canonical form merges equal neighbours into one plateau
    assert omega(StepFn([0, 0.3, 0.7, 1], [1.0, 1.0, 0.0], canonical=False)).intervals == [
        (0.0, 0.7), (0.7, 1.0)]


@settings(max_examples=200)
@given(step_fns())
def test_plateaus_grow_under_projection(f):
    assert omega(f).issubset(omega(proj_k(f)))


def test_plateau_set_validation():
    with pytest.raises(ValueError):
        PlateauSet([0.0, 0.4], [0.5, 1.0])
    with pytest.raises(ValueError):
        PlateauSet([0.5], [0.5])
    ps = PlateauSet([0.1, 0.5], [0.3, 0.9])
    np.testing.assert_array_equal(ps.locate([0.05, 0.2, 0.3, 0.6, 0.95]), [-1, 0, -1, 1, -1])


def test_proj_h_examples():
    h = StepFn([0, 0.2, 0.9, 1], [1.0, -2.0, 5.0])
    full = proj_h(PlateauSet([0.0], [1.0]), h)
    assert full.n_cells == 1 and full.values[0] == pytest.approx(h.integral(), abs=1e-15)
    assert proj_h(PlateauSet.empty(), h) is h
    g = proj_h(PlateauSet([0.0], [0.5]), StepFn.indicator(0.25, 1.0))
    np.testing.assert_allclose(g.breakpoints, [0, 0.5, 1])
    np.testing.assert_allclose(g.values, [0.5, 1.0])


def test_proj_h_is_orthogonal_projection(rng):
    for _ in range(100):
        X = random_monotone(rng, int(rng.integers(1, 10)))
        h = random_stepfn(rng, int(rng.integers(1, 10)))
        ph = proj_h(omega(X), h)
        # idempotent, and the residual is orthogonal to functions constant on plateaus
        assert proj_h(omega(X), ph).allclose(ph, 1e-12)
        z = random_stepfn(rng, 5)
        zh = proj_h(omega(X), z)
        assert abs((h - ph).dot(zh)) <= 1e-12 * (1 + h.sup_norm() * z.sup_norm())


def test_polar_cone_examples():
    tent = StepFn([0, 0.5, 1], [1.0, -1.0])
    assert in_polar_cone(tent)
    assert not in_polar_cone(StepFn.constant(1.0))
    assert not in_polar_cone(StepFn.constant(-1.0))
    with pytest.raises(ValueError):
        in_polar_cone(tent, -1.0)


def test_subdifferential_examples(rng):
    g = StepFn([0, 0.4, 1], [0.0, 1.0])
    assert in_subdifferential(StepFn.constant(0.0), g)
    tent = StepFn([0, 0.5, 1], [1.0, -1.0])
    assert in_subdifferential(tent, StepFn.constant(2.0))
    # across a jump of g the primitive must vanish
    assert not in_subdifferential(StepFn([0, 0.2, 0.6, 1], [1.0, -1.0, 0.0]), g)
    with pytest.raises(ValueError):
        subdifferential_violation(tent, StepFn([0, 0.5, 1], [1.0, 0.0]))


def test_minimal_selection_property(rng):
    for _ in range(100):
        g = random_monotone(rng, int(rng.integers(1, 8)))
        # coarsen g so that plateaus are wide
        g = proj_k(g + random_stepfn(rng, 3, 2.0))
        h = random_monotone(rng, int(rng.integers(1, 8)))
        xi_h = minimal_selection(g, h)
        assert in_subdifferential(xi_h, g)
        for _ in range(10):
            xi = random_subgradient(g, rng)
            assert in_subdifferential(xi, g)
            z = proj_h(omega(g), random_stepfn(rng, 6))
            lhs = (z - h - xi_h).norm(2)
            rhs = (z - h - xi).norm(2)
            assert lhs <= rhs + 1e-12 * (1 + rhs)


def test_decomposition_against_common_values(rng):
    f = random_stepfn(rng, 12)
    g = proj_k(f)
    part, (fv, gv) = common_values(f, g)
    assert np.dot(part.widths, (fv - gv) * gv) == pytest.approx(0.0, abs=1e-12)
    assert in_subdifferential(f - g, g)
