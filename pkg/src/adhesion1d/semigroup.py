"""Lagrangian semigroup of sticky particle dynamics.

A state is a pair ``(X, V)``: a quantile function and a velocity that is
constant on every plateau of ``X``. The flow is

    X(t) = proj_k(X0 + t V0),   V(t) = proj_h(omega(X(t)), V0),

and everything here (residuals of the equivalent evolution laws, transport
maps, energies, the entropy condition) is evaluated exactly on the step
function representation.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .cone import omega, proj_h, proj_k, subdifferential_violation
from .measures import MassVelocityState, PowerCost, measure_of
from .stepfn import StepFn, lp_distance

_origin_ids = itertools.count()


@dataclass(frozen=True)
class LagrangianState:
    """``(X, V)`` at time ``t`` with provenance.

    ``scenario_id`` and ``origin`` identify the trajectory: states produced by
    :func:`step` / :func:`step_from` inherit both from their parent.
    """

    t: float
    X: StepFn
    V: StepFn
    scenario_id: str = ""
    origin: int = field(default_factory=lambda: next(_origin_ids))

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("time must be nonnegative")
        if not self.X.canonical().is_nondecreasing():
            raise ValueError("X must be nondecreasing")
        if not omega(self.X).issubset(omega(self.V)):
            raise ValueError("V must be constant on every plateau of X")

    @classmethod
    def from_state(cls, state: MassVelocityState, t: float = 0.0,
                   scenario_id: str = "") -> "LagrangianState":
        X, V = state.lagrangian()
        X = X.canonical()
        # near-coincident atoms merged by the canonical form share a plateau
        V = proj_h(omega(X), V)
        return cls(float(t), X, V, scenario_id)

    def to_state(self) -> MassVelocityState:
        X = self.X.canonical()
        return MassVelocityState(X.widths, X.values, self.V.on(X.partition))

    @property
    def measure(self):
        return measure_of(self.X)

    def snapshot_csv(self) -> str:
        """Rows ``t,w_left,X,V`` per cell of ``X``; the scenario id is in a
        leading comment line."""
        X = self.X.canonical()
        V = self.V.on(X.partition)
        out = io.StringIO()
        out.write(f"# scenario={self.scenario_id}\n")
        out.write("t,w_left,X,V\n")
        for w, x, v in zip(X.breakpoints[:-1], X.values, V):
            out.write(f"{self.t!r},{float(w)!r},{float(x)!r},{float(v)!r}\n")
        return out.getvalue()


def _advance(X: StepFn, V: StepFn, dt: float) -> tuple[StepFn, StepFn]:
    Xt = proj_k(X + dt * V)
    return Xt, proj_h(omega(Xt), V)


def step(s0: LagrangianState, t: float) -> LagrangianState:
    """State at time ``t`` from the initial state (which must sit at t=0)."""
    if s0.t != 0.0:
        raise ValueError("step starts from a state at t = 0; use step_from")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return s0
    X, V = _advance(s0.X, s0.V, float(t))
    return LagrangianState(float(t), X, V, s0.scenario_id, s0.origin)


def step_from(s: LagrangianState, t: float) -> LagrangianState:
    """Semigroup form: restart the flow from ``s`` at time ``s.t``."""
    if t < s.t:
        raise ValueError("t must not precede the state's time")
    if t == s.t:
        return s
    X, V = _advance(s.X, s.V, float(t) - s.t)
    return LagrangianState(float(t), X, V, s.scenario_id, s.origin)


def residual_LIII(s0: LagrangianState, t: float) -> float:
    """``|| t V(t) - (X(t) - proj_h(omega(X(t)), X0)) ||_2``; zero on exact
    solutions."""
    if not t > 0:
        raise ValueError("residual_LIII needs t > 0 (use initial_velocity_check)")
    st = step(s0, t)
    rhs = st.X - proj_h(omega(st.X), s0.X)
    return lp_distance(t * st.V, rhs, 2)


def residual_LI(s0: LagrangianState, t: float, dt: float) -> float:
    """Distance of ``V0 - (X(t+dt) - X(t))/dt`` from the normal cone of K at
    ``X(t)``, measured through its primitive."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    Xa = step(s0, t).X
    Xb = step(s0, t + dt).X
    xi = s0.V - (Xb - Xa) / dt
    return subdifferential_violation(xi, Xa)


def initial_velocity_check(s0: LagrangianState, times) -> list[tuple[float, float]]:
    """Rows ``(t, ||(X(t) - X0)/t - V0||_2)``."""
    rows = []
    for t in times:
        st = step(s0, t)
        rows.append((float(t), lp_distance((st.X - s0.X) / t, s0.V, 2)))
    return rows


def energy(s: LagrangianState, psi=None) -> float:
    """``int_0^1 psi(V) = sum_i m_i psi(v_i)``; default ``psi(r) = r^2``."""
    psi = PowerCost(2) if psi is None else psi
    return float(np.dot(s.V.widths, psi(s.V.values)))


def oleinik_margin(s: LagrangianState) -> float:
    """Largest ``v(x2) - v(x1) - (x2 - x1)/t`` over atom pairs ``x1 < x2``.

    With ``u = v - x/t`` this is the largest increase of ``u`` along the
    atoms, found in one pass with a running minimum.
    """
    if not s.t > 0:
        raise ValueError("the entropy condition needs t > 0")
    X = s.X.canonical()
    if X.n_cells < 2:
        return -np.inf
    v = s.V.on(X.partition)
    u = v - X.values / s.t
    run_min = np.minimum.accumulate(u)[:-1]
    return float(np.max(u[1:] - run_min))


def oleinik_check(s: LagrangianState, tol: float = 1e-9) -> bool:
    """One-sided Lipschitz bound ``v(x2) - v(x1) <= (x2 - x1)/t``.

    ``tol`` is relative to ``1 + max|v - x/t|`` to absorb round-off in
    ``x/t`` for small ``t``.
    """
    if s.X.canonical().n_cells < 2:
        return True
    X = s.X.canonical()
    u = s.V.on(X.partition) - X.values / s.t
    return oleinik_margin(s) <= tol * (1.0 + float(np.max(np.abs(u))))


@dataclass(frozen=True)
class TransportMap:
    """Monotone map from the atoms at time ``s`` to the atoms at ``t``.

    ``target[i]`` is the target atom of source atom ``i``; ``weights[i]`` is
    its mass, so the weights of each target sum to the target mass.
    """

    s: float
    t: float
    source_x: np.ndarray
    source_v: np.ndarray
    target: np.ndarray
    weights: np.ndarray
    target_x: np.ndarray
    target_v: np.ndarray
    target_m: np.ndarray

    def disintegration(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Source indices and probability weights carried to target ``j``."""
        idx = np.flatnonzero(self.target == j)
        return idx, self.weights[idx] / self.target_m[j]

    def averaged_velocity(self) -> np.ndarray:
        """Disintegration average of the source velocities, per target."""
        n = len(self.target_x)
        mom = np.bincount(self.target, weights=self.weights * self.source_v, minlength=n)
        return mom / self.target_m

    def averaged_displacement_velocity(self) -> np.ndarray:
        """``(y - average source position) / (t - s)``, per target."""
        n = len(self.target_x)
        com = np.bincount(self.target, weights=self.weights * self.source_x,
                          minlength=n) / self.target_m
        return (self.target_x - com) / (self.t - self.s)

    def identity_residual(self) -> float:
        """Largest deviation of the target velocity from both averages."""
        r = float(np.max(np.abs(self.averaged_velocity() - self.target_v)))
        if self.t > self.s:
            r = max(r, float(np.max(np.abs(
                self.averaged_displacement_velocity() - self.target_v))))
        return r


def transport_map(a: LagrangianState, b: LagrangianState) -> TransportMap:
    """Atom-level map from state ``a`` to the later state ``b`` of the same
    trajectory. Clusters only merge, so each cell of ``a.X`` lies inside one
    cell of ``b.X``."""
    if (a.scenario_id, a.origin) != (b.scenario_id, b.origin):
        raise ValueError("states do not belong to one trajectory")
    if b.t < a.t:
        raise ValueError("target state precedes source state")
    Xa, Xb = a.X.canonical(), b.X.canonical()
    if not np.all(np.isin(Xb.breakpoints, Xa.breakpoints)):
        raise ValueError("cluster structures are incompatible: target splits a source atom")
    mids = 0.5 * (Xa.breakpoints[:-1] + Xa.breakpoints[1:])
    target = Xb.partition.cell_index(mids).astype(np.int64)
    return TransportMap(
        s=a.t, t=b.t,
        source_x=Xa.values.copy(), source_v=a.V.on(Xa.partition),
        target=target, weights=Xa.widths,
        target_x=Xb.values.copy(), target_v=b.V.on(Xb.partition),
        target_m=Xb.widths)
