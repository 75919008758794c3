import math

import numpy as np
import pytest

from adhesion1d.cone import omega, proj_k
from adhesion1d.measures import MassVelocityState, PowerCost, d_dist
from adhesion1d.particles import ParticleSystem
from adhesion1d.scenario import random_state
from adhesion1d.semigroup import (LagrangianState, energy, initial_velocity_check, oleinik_check,
                                  oleinik_margin, residual_LI, residual_LIII, step, step_from,
                                  transport_map)
from adhesion1d.stepfn import StepFn, lp_distance
from adhesion1d.verify import equivalence_errors

HEAD_ON = MassVelocityState([0.5, 0.5], [0.0, 1.0], [1.0, -1.0])


def s0_of(state, sid="test"):
    return LagrangianState.from_state(state, scenario_id=sid)


def test_state_invariants():
    with pytest.raises(ValueError):
        LagrangianState(0.0, StepFn([0, 0.5, 1], [1.0, 0.0]), StepFn.constant(0.0))
    with pytest.raises(ValueError):
        LagrangianState(0.0, StepFn.constant(0.0), StepFn([0, 0.5, 1], [1.0, 0.0]))
    with pytest.raises(ValueError):
        LagrangianState(-1.0, StepFn.constant(0.0), StepFn.constant(0.0))


def test_step_examples():
    s0 = s0_of(HEAD_ON)
    assert step(s0, 0.0) is s0
    s1 = step(s0, 1.0)
    assert s1.X == StepFn.constant(0.5) and s1.V == StepFn.constant(0.0)
    early = step(s0, 0.3)
    assert early.X.allclose(s0.X + 0.3 * s0.V, 0.0)
    assert early.V == s0.V


def test_step_matches_particles(rng):
    for _ in range(100):
        st = random_state(rng, 50, 2)
        ex, ev = equivalence_errors(st, np.linspace(0, 10, 20))
        assert ex <= 1e-9 and ev <= 1e-9


def test_step_from_examples(rng):
    s0 = s0_of(HEAD_ON)
    s = step(s0, 0.7)
    assert step_from(s, 0.7) is s
    for _ in range(50):
        st = random_state(rng, 30, 2)
        s0 = s0_of(st)
        mid = step(s0, 1.0)
        a, b = step_from(mid, 2.0), step(s0, 2.0)
        assert lp_distance(a.X, b.X, math.inf) <= 1e-9
        assert lp_distance(a.V, b.V, math.inf) <= 1e-9
        # plateaus only grow along the flow
        assert omega(mid.X).issubset(omega(b.X))
    with pytest.raises(ValueError):
        step(mid, 3.0)
    with pytest.raises(ValueError):
        step_from(mid, 0.5)


def test_residual_LIII_examples(rng):
    s0 = s0_of(MassVelocityState([0.5, 0.5], [0.0, 1.0], [-1.0, 1.0]))
    assert residual_LIII(s0, 2.0) == 0.0
    assert residual_LIII(s0_of(HEAD_ON), 1.0) == 0.0
    for _ in range(100):
        s0 = s0_of(random_state(rng, 50, 2))
        for t in (0.1, 1.0, 10.0):
            assert residual_LIII(s0, t) <= 1e-9
    with pytest.raises(ValueError):
        residual_LIII(s0, 0.0)


def test_residual_LI_examples(rng):
    free = s0_of(MassVelocityState([0.5, 0.5], [0.0, 1.0], [-1.0, 1.0]))
    assert residual_LI(free, 1.0, 1e-3) == 0.0
    # merged head-on pair: xi = V0 is a tent derivative, its primitive
    # vanishes at 0 and 1 and is nonnegative
    assert residual_LI(s0_of(HEAD_ON), 1.0, 1e-3) <= 1e-15
    for _ in range(50):
        st = random_state(rng, 20, 2)
        s0 = s0_of(st)
        events = ParticleSystem(st).run_to_completion().event_times()
        t = float(rng.uniform(0.1, 3))
        gaps = events[events > t] - t
        dt = 0.5 * float(gaps.min()) if len(gaps) else 1e-3
        dt = min(dt, 1e-3)
        # no event in (t, t + dt]: only round-off of the difference quotient remains
        scale = 1 + s0.X.sup_norm() + s0.V.sup_norm()
        assert residual_LI(s0, t, dt) <= 1e-12 * scale * (1 + 1 / dt)


def test_residual_LI_detects_wrong_velocity():
    s0 = s0_of(HEAD_ON)
    wrong = LagrangianState(0.0, s0.X, StepFn.constant(1.0))
    st = step(s0, 0.2)
    xi = wrong.V - (step(s0, 0.2 + 1e-3).X - st.X) / 1e-3
    from adhesion1d.cone import subdifferential_violation
    assert subdifferential_violation(xi, st.X) > 0.1


def test_initial_velocity_limit(rng):
    s0 = s0_of(MassVelocityState([0.5, 0.5], [0.0, 1.0], [-1.0, 1.0]))
    assert all(r <= 1e-14 for _, r in initial_velocity_check(s0, [1.0, 0.1]))
    head = s0_of(HEAD_ON)
    assert all(r <= 1e-15 for _, r in initial_velocity_check(head, [0.4, 0.1, 0.01]))
    s0 = s0_of(random_state(rng, 30, 30))
    rows = initial_velocity_check(s0, [10 * 2.0 ** -k for k in range(25)])
    scale = 1 + s0.X.sup_norm()
    # decreasing down to the round-off floor of (X(t) - X0) / t
    for (_, a), (t, b) in zip(rows, rows[1:]):
        assert b <= a + 1e-14 * scale / t
    assert rows[-1][1] <= 1e-14 * scale / rows[-1][0]


def test_energy_and_oleinik():
    s0 = s0_of(HEAD_ON)
    assert energy(step(s0, 0.3)) == pytest.approx(1.0)
    assert energy(step(s0, 0.5)) == 0.0
    assert energy(step(s0, 2.0), PowerCost(4)) == 0.0
    assert oleinik_check(step(s0, 1.0))
    assert oleinik_margin(step(s0, 1.0)) == -math.inf
    # free flight of Oleinik-feasible data stays feasible
    s0 = s0_of(MassVelocityState([0.3, 0.7], [0.0, 1.0], [0.0, 0.5]))
    for t in (0.5, 1.0, 4.0):
        assert oleinik_check(step(s0, t))


def test_energy_nonincreasing_and_oleinik_random(rng):
    for _ in range(50):
        s0 = s0_of(random_state(rng, 40, 2))
        prev = energy(s0)
        for t in np.linspace(0.05, 10, 40):
            st = step(s0, t)
            e = energy(st)
            assert e <= prev + 1e-12
            prev = e
            assert oleinik_check(st)


def test_right_continuity_before_first_collision(rng):
    for _ in range(100):
        st = random_state(rng, 50, 2)
        s0 = s0_of(st)
        events = ParticleSystem(st).run_to_completion().event_times()
        t_first = float(events[0]) if len(events) else 1.0
        bound = 2 * (s0.V.norm(2) + 1)
        for t in np.geomspace(1e-6, 1e-3, 4):
            if t >= t_first:
                continue
            d = d_dist(step(s0, t).to_state(), st)
            assert d <= bound * t
        ds = [d_dist(step(s0, t).to_state(), st) for t in np.geomspace(1e-12, 1e-2, 6)]
        assert ds[0] <= 1e-9


def test_transport_map_examples():
    s0 = s0_of(HEAD_ON, "pair")
    tm = transport_map(s0, s0)
    assert tm.target.tolist() == [0, 1]
    assert tm.identity_residual() == 0.0
    s1 = step(s0, 1.0)
    tm = transport_map(s0, s1)
    assert tm.target.tolist() == [0, 0]
    idx, w = tm.disintegration(0)
    assert idx.tolist() == [0, 1] and w.tolist() == [0.5, 0.5]
    assert tm.averaged_velocity().tolist() == [0.0]
    assert tm.averaged_displacement_velocity().tolist() == [0.0]


def test_transport_map_identities_random(rng):
    for _ in range(50):
        s0 = s0_of(random_state(rng, 30, 2))
        a = step(s0, float(rng.uniform(0, 2)))
        b = step_from(a, a.t + float(rng.uniform(0.01, 3)))
        tm = transport_map(a, b)
        assert np.all(np.diff(tm.target) >= 0)
        sums = np.bincount(tm.target, tm.weights, len(tm.target_m))
        np.testing.assert_allclose(sums, tm.target_m, atol=1e-12)
        assert tm.identity_residual() <= 1e-9


def test_transport_map_rejects_foreign_states():
    a = s0_of(HEAD_ON, "one")
    b = s0_of(HEAD_ON, "one")
    with pytest.raises(ValueError, match="trajectory"):
        transport_map(a, step(b, 1.0))
    with pytest.raises(ValueError):
        transport_map(step(a, 1.0), a)


def test_snapshot_csv():
    text = step(s0_of(HEAD_ON, "pair"), 0.25).snapshot_csv()
    assert text.splitlines() == ["# scenario=pair", "t,w_left,X,V",
                                 "0.25,0.0,0.25,1.0", "0.25,0.5,0.75,-1.0"]


def test_velocity_norms_nonincreasing(rng):
    for _ in range(30):
        s0 = s0_of(random_state(rng, 30, 2))
        prev = [s0.V.norm(p) for p in (1, 2, 4)]
        for t in np.linspace(0.1, 5, 25):
            V = step(s0, t).V
            cur = [V.norm(p) for p in (1, 2, 4)]
            assert all(c <= q + 1e-12 for c, q in zip(cur, prev))
            prev = cur


def test_projection_form_of_step(rng):
    st = random_state(rng, 20, 20)
    s0 = s0_of(st)
    assert step(s0, 1.3).X.allclose(proj_k(s0.X + 1.3 * s0.V), 0.0)
