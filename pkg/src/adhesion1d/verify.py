"""Property suites run by ``adhesion1d verify``.

Each suite takes an initial state and the scenario's sample times and
returns :class:`~adhesion1d.scenario.ReportRecord` rows. A record passes
iff its measured value is at most its threshold, so NaN data fails.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from .cone import (in_cone, omega, proj_k, subdifferential_violation)
from .gradflow import evi_residual, exact_flow, gradient_flow_run, m_eps_bound, perturbed_initial
from .hopf import CdfSolution, cdf_discrepancy, hopf_solution
from .measures import (DiscreteMeasure, MassVelocityState, PowerCost, measure_of,
                       pseudo_norm, transport_cost, u_dist, wasserstein)
from .particles import ParticleSystem
from .scenario import ReportRecord, Scenario, make_rng, random_state
from .semigroup import (LagrangianState, oleinik_margin, residual_LI, residual_LIII,
                        step, step_from)
from .stepfn import (StepFn, common_values, lower_convex_envelope, lp_distance, primitive,
                     refine_common)

DEFAULT_TIMES = (0.1, 1.0, 10.0)


# -- random step functions ------------------------------------------------------------

def random_stepfn(rng: np.random.Generator, n: int, scale: float = 1.0) -> StepFn:
    """``n`` cells with uniform random breakpoints and normal values."""
    b = np.unique(np.concatenate(([0.0, 1.0], rng.uniform(0, 1, n - 1))))
    return StepFn(b, scale * rng.standard_normal(len(b) - 1), canonical=False)


def random_monotone(rng: np.random.Generator, n: int, scale: float = 1.0) -> StepFn:
    f = random_stepfn(rng, n, scale)
    return StepFn(f.partition, np.sort(f.values))


def hull_derivative(f: StepFn) -> StepFn:
    """Second route to the projection: right derivative of the convex
    envelope of the primitive."""
    return lower_convex_envelope(primitive(f)).derivative()


# -- individual measurements --------------------------------------------------------

def projection_checks(f: StepFn, rng: np.random.Generator, n_test: int = 100) -> dict:
    g = proj_k(f)
    scale = 1.0 + f.sup_norm() ** 2
    out = {}
    out["dual_route"] = lp_distance(g, hull_derivative(f), math.inf) / (1.0 + f.sup_norm())
    part, (fv, gv) = common_values(f, g)
    r = fv - gv
    vi = -math.inf
    for _ in range(n_test):
        z = random_monotone(rng, int(rng.integers(1, 12)), scale=1.0 + f.sup_norm())
        # <f - g, z - g> is linear in z, so evaluate on the finer partition
        zpart, (zv, rv, gz) = common_values(z, StepFn(part, r, canonical=False), g)
        vi = max(vi, float(np.dot(zpart.widths, rv * (zv - gz))))
    out["variational"] = vi / scale
    out["complementarity"] = abs(float(np.dot(part.widths, r * gv))) / scale
    out["in_cone"] = 0.0 if in_cone(g) else 1.0
    out["plateaus"] = 0.0 if omega(f).issubset(omega(g)) else 1.0
    out["decomposition"] = subdifferential_violation(f - g, g) / (1.0 + f.sup_norm())
    return out


def contraction_slack(f: StepFn, h: StepFn) -> float:
    """Largest violation of the L^p contraction (p = 1, 2, 4, inf) and of
    both convex-cost inequalities with ``psi(r) = r^4``."""
    pf, ph = proj_k(f), proj_k(h)
    worst = -math.inf
    for p in (1, 2, 4, math.inf):
        worst = max(worst, lp_distance(pf, ph, p) - lp_distance(f, h, p))
    psi = PowerCost(4)
    a, b = refine_common(pf, ph)
    c, d = refine_common(f, h)
    worst = max(worst, float(np.dot(a.widths, psi(a.values - b.values)))
                - float(np.dot(c.widths, psi(c.values - d.values))))
    worst = max(worst, float(np.dot(pf.widths, psi(pf.values)))
                - float(np.dot(f.widths, psi(f.values))))
    return worst


def equivalence_errors(state: MassVelocityState, times) -> tuple[float, float]:
    """Largest position and velocity gap between the event-driven system and
    the projection formula, per particle."""
    s0 = LagrangianState.from_state(state)
    sys = ParticleSystem(state)
    X0, _ = state.lagrangian()
    mids = 0.5 * (X0.breakpoints[:-1] + X0.breakpoints[1:])
    ex = ev = 0.0
    for t in times:
        sys.evolve(t)
        xp, vp = sys.particle_values()
        st = step(s0, t)
        ex = max(ex, float(np.max(np.abs(xp - st.X(mids)))))
        ev = max(ev, float(np.max(np.abs(vp - st.V(mids)))))
    return ex, ev


def hopf_gap(state: MassVelocityState, t: float) -> float:
    s0 = LagrangianState.from_state(state)
    particle = CdfSolution.of_measure(measure_of(step(s0, t).X), t)
    return cdf_discrepancy(hopf_solution(state, t), particle)


def stability_slack(m1: MassVelocityState, m2: MassVelocityState, t: float,
                    ps=(1, 2, 4)) -> float:
    """Largest violation of ``W_p(rho1_t, rho2_t) <= W_p(rho1_0, rho2_0) +
    t U_p`` over ``ps`` and of the convex-cost bound with ``psi = r^4``."""
    s1, s2 = LagrangianState.from_state(m1), LagrangianState.from_state(m2)
    a, b = step(s1, t), step(s2, t)
    r1t, r2t = measure_of(a.X), measure_of(b.X)
    worst = -math.inf
    for p in ps:
        lhs = wasserstein(r1t, r2t, p)
        rhs = wasserstein(m1.measure, m2.measure, p) + t * u_dist(m1, m2, p)
        worst = max(worst, lhs - rhs)
    psi = PowerCost(4)
    f, g = refine_common(s1.X + t * s1.V, s2.X + t * s2.V)
    bound = float(np.dot(f.widths, psi(f.values - g.values)))
    worst = max(worst, transport_cost(r1t, r2t, psi) - bound)
    return worst


def integrated_velocity_ratio(m1: MassVelocityState, m2: MassVelocityState, t: float) -> float:
    """``int_0^t U_2^2 dr`` divided by ``(1 + t)(|mu1| + |mu2|)(W_2 + U_2)``.

    ``U_2`` is piecewise constant between the collision times of the two
    systems, so the integral is a finite sum.
    """
    p1 = ParticleSystem(m1).evolve(t)
    p2 = ParticleSystem(m2).evolve(t)
    cuts = np.unique(np.concatenate(([0.0, t], p1.event_times(), p2.event_times())))
    cuts = cuts[(cuts >= 0) & (cuts <= t)]
    q1, q2 = ParticleSystem(m1), ParticleSystem(m2)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        q1.evolve(a)
        q2.evolve(a)
        u = u_dist(q1.state_of(), q2.state_of(), 2)
        total += (b - a) * u * u
    denom = ((1 + t) * (pseudo_norm(m1, 2) + pseudo_norm(m2, 2))
             * (wasserstein(m1.measure, m2.measure, 2) + u_dist(m1, m2, 2)))
    return total / denom if denom > 0 else (0.0 if total == 0 else math.inf)


def near_event(t: float, events: np.ndarray, window: float) -> bool:
    return bool(len(events)) and float(np.min(np.abs(events - t))) < window


def conservation_checks(state: MassVelocityState, times) -> dict:
    sys = ParticleSystem(state)
    full = ParticleSystem(state).run_to_completion()
    ev = full.event_times()
    p0 = state.momentum
    e_prev = sys.kinetic_energy()
    out = {"mass": 0.0, "momentum": 0.0, "energy_increase": 0.0,
           "energy_jump_off_event": 0.0, "energy_no_drop_at_event": 0.0}
    probe = sorted(set([float(t) for t in times] + ev.tolist()))
    last_t = 0.0
    for t in probe:
        sys.evolve(t)
        out["mass"] = max(out["mass"], abs(sys.mass - 1.0))
        out["momentum"] = max(out["momentum"], abs(sys.momentum - p0))
        e = sys.kinetic_energy()
        out["energy_increase"] = max(out["energy_increase"], e - e_prev)
        has_event = bool(np.any((ev > last_t) & (ev <= t)))
        # energy is piecewise constant with jumps only at logged events
        if not has_event:
            out["energy_jump_off_event"] = max(out["energy_jump_off_event"], abs(e - e_prev))
        elif np.any(ev == t):
            if not e < e_prev:
                out["energy_no_drop_at_event"] = 1.0
        e_prev, last_t = e, t
    return out


# -- suites ---------------------------------------------------------------------------

def _record(sid, name, value, thr, t0):
    return ReportRecord(sid, name, float(value), float(thr), time.perf_counter() - t0)


def suite_cone(sc: Scenario, state: MassVelocityState, times, rng, tol=None):
    recs = []
    s0 = LagrangianState.from_state(state)
    fs = [(f"t={t:g}", s0.X + t * s0.V) for t in times]
    fs += [(f"random{k}", random_stepfn(rng, int(rng.integers(1, 30)))) for k in range(10)]
    thr = sc.tol("residual", tol)
    for label, f in fs:
        t0 = time.perf_counter()
        c = projection_checks(f, rng)
        for key in ("dual_route", "variational", "complementarity", "decomposition"):
            recs.append(_record(sc.id, f"cone.{key}[{label}]", c[key], thr, t0))
        recs.append(_record(sc.id, f"cone.in_cone[{label}]", c["in_cone"], 0.0, t0))
        recs.append(_record(sc.id, f"cone.plateaus[{label}]", c["plateaus"], 0.0, t0))
        t0 = time.perf_counter()
        h = f + random_stepfn(rng, int(rng.integers(1, 30)), 0.5)
        recs.append(_record(sc.id, f"cone.contraction[{label}]", contraction_slack(f, h),
                            sc.tol("contraction", tol), t0))
    return recs


def suite_stability(sc: Scenario, state, times, rng, tol=None):
    recs = []
    partner = random_state(rng, n_max=max(2, min(50, len(state))))
    thr = sc.tol("stability", tol)
    for t in times:
        t0 = time.perf_counter()
        recs.append(_record(sc.id, f"stability.wasserstein[t={t:g}]",
                            stability_slack(state, partner, t), thr, t0))
    s0 = LagrangianState.from_state(state)
    ts = sorted(set(times))
    for a, b in zip(ts[:-1], ts[1:]):
        t0 = time.perf_counter()
        Xa, Xb = step(s0, a), step(s0, b)
        worst = -math.inf
        for p in (1, 2, 4):
            lip = lp_distance(Xa.X, Xb.X, p) - (b - a) * lp_distance(s0.V, StepFn.constant(0.0), p)
            mono = Xb.V.norm(p) - Xa.V.norm(p)
            worst = max(worst, lip, mono)
        recs.append(_record(sc.id, f"stability.lipschitz_and_velocity_norm[{a:g},{b:g}]",
                            worst, thr, t0))
    if ts:
        t0 = time.perf_counter()
        ratio = integrated_velocity_ratio(state, partner, max(ts))
        recs.append(_record(sc.id, "stability.integrated_velocity_ratio", ratio, 100.0, t0))
    return recs


def suite_equivalence(sc: Scenario, state, times, rng, tol=None):
    recs = []
    thr = sc.tol("equivalence", tol)
    t0 = time.perf_counter()
    ex, ev = equivalence_errors(state, times)
    recs.append(_record(sc.id, "equivalence.positions", ex, thr, t0))
    recs.append(_record(sc.id, "equivalence.velocities", ev, thr, t0))
    s0 = LagrangianState.from_state(state)
    events = ParticleSystem(state).run_to_completion().event_times()
    for t in times:
        if t <= 0:
            continue
        t0 = time.perf_counter()
        recs.append(_record(sc.id, f"equivalence.residual_LIII[t={t:g}]",
                            residual_LIII(s0, t), sc.tol("residual", tol), t0))
        t0 = time.perf_counter()
        recs.append(_record(sc.id, f"equivalence.hopf[t={t:g}]", hopf_gap(state, t),
                            sc.tol("hopf", tol), t0))
        t0 = time.perf_counter()
        mid = step(s0, t)
        later = step(s0, 2 * t)
        recs.append(_record(sc.id, f"equivalence.semigroup[t={t:g}]",
                            max(lp_distance(step_from(mid, 2 * t).X, later.X, math.inf),
                                lp_distance(step_from(mid, 2 * t).V, later.V, math.inf)),
                            thr, t0))
        dt = 1e-7 * max(1.0, t)
        if not near_event(t, events, sc.tol("event_window")) and not np.any(
                (events > t) & (events <= t + dt)):
            t0 = time.perf_counter()
            scale = 1.0 + s0.V.sup_norm() + s0.X.sup_norm()
            recs.append(_record(sc.id, f"equivalence.residual_LI[t={t:g}]",
                                residual_LI(s0, t, dt), 1e-6 * scale, t0))
    return recs


def suite_entropy(sc: Scenario, state, times, rng, tol=None):
    recs = []
    t0 = time.perf_counter()
    c = conservation_checks(state, times)
    thr = sc.tol("conservation", tol)
    recs.append(_record(sc.id, "entropy.mass", c["mass"], thr, t0))
    recs.append(_record(sc.id, "entropy.momentum", c["momentum"], thr, t0))
    recs.append(_record(sc.id, "entropy.energy_increase", c["energy_increase"], thr, t0))
    recs.append(_record(sc.id, "entropy.energy_jump_off_event", c["energy_jump_off_event"], thr, t0))
    recs.append(_record(sc.id, "entropy.energy_drop_at_event", c["energy_no_drop_at_event"], 0.0, t0))
    s0 = LagrangianState.from_state(state)
    for t in times:
        if t <= 0:
            continue
        t0 = time.perf_counter()
        st = step(s0, t)
        X = st.X.canonical()
        u = st.V.on(X.partition) - X.values / t
        thr_o = sc.tol("oleinik", tol) * (1.0 + float(np.max(np.abs(u))))
        recs.append(_record(sc.id, f"entropy.oleinik[t={t:g}]",
                            max(0.0, oleinik_margin(st)), thr_o, t0))
    return recs


def suite_gradflow(sc: Scenario, state, times, rng, tol=None):
    recs = []
    s0 = LagrangianState.from_state(state)
    events = ParticleSystem(state).run_to_completion().event_times()
    window = sc.tol("event_window")
    for t in times:
        if t <= 0 or near_event(t, events, window):
            continue
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(20):
            k = int(rng.integers(1, 8))
            eta = DiscreteMeasure(rng.dirichlet(np.ones(k)), rng.normal(0.5, 1.0, k))
            w2 = wasserstein(measure_of(step(s0, t).X), eta, 2) ** 2
            worst = max(worst, evi_residual(s0, t, eta) / (1.0 + w2))
        recs.append(_record(sc.id, f"gradflow.evi[t={t:g}]", worst, sc.tol("evi", tol), t0))
    pos = [t for t in times if t > 0]
    if pos:
        T = max(pos)
        eps = T / 16
        t0 = time.perf_counter()
        errs = []
        Xe = step(s0, eps).X
        for h in (0.04, 0.02, 0.01):
            p = gradient_flow_run(Xe, s0.X, math.log(T / eps), h)
            errs.append(max(lp_distance(X, step(s0, eps * math.exp(tau)).X)
                            for tau, X in zip(p.tau, p.X)))
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:]) if a > 1e-13 and b > 1e-13]
        order = min(orders) if orders else math.inf
        recs.append(_record(sc.id, "gradflow.order_deficit", 0.9 - order, 0.0, t0))
        t0 = time.perf_counter()
        worst = -math.inf
        Xt = step(s0, T).X
        for k in range(4):
            e = T / 2 ** k
            Xtil = perturbed_initial(state, e)
            Xg = gradient_flow_run(Xtil, s0.X, math.log(T / e), 0.01).final
            slack = lp_distance(Xg, exact_flow(Xtil, s0.X, math.log(T / e)))
            worst = max(worst, lp_distance(Xg, Xt) - 2 * m_eps_bound(state, e) * T - slack)
        recs.append(_record(sc.id, "gradflow.limit_bound", worst, 1e-9, t0))
    return recs


SUITE_FUNCS: dict[str, Callable] = {
    "cone": suite_cone,
    "stability": suite_stability,
    "equivalence": suite_equivalence,
    "entropy": suite_entropy,
    "gradflow": suite_gradflow,
}


def run_suites(sc: Scenario, state: MassVelocityState, suites=None, tol=None,
               rng=None) -> list[ReportRecord]:
    rng = make_rng(sc.seed) if rng is None else rng
    times = [t for t in sc.times] or list(DEFAULT_TIMES)
    recs = []
    for name in suites or sc.suites:
        t0 = time.perf_counter()
        try:
            recs.extend(SUITE_FUNCS[name](sc, state, times, rng, tol))
        except (ValueError, FloatingPointError, ZeroDivisionError) as exc:
            # data the suite cannot even evaluate (e.g. NaN velocities) is a failed check
            recs.append(ReportRecord(sc.id, f"{name}.error: {exc}", math.inf, 0.0,
                                     time.perf_counter() - t0))
    return recs
