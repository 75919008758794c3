"""Wasserstein gradient flow of ``phi(rho) = -W_2^2(rho, sigma) / 2``.

In quantile coordinates the flow reads ``dX/dtau in -dI_K(X) + X - X_sigma``
and is integrated by implicit Euler, each step being one projection onto K.
With ``sigma = rho_0`` and ``t = eps * exp(tau)`` the flow started at
``rho_eps`` reproduces the sticky particle solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cone import proj_k
from .measures import DiscreteMeasure, MassVelocityState, quantile, wasserstein
from .semigroup import LagrangianState, step
from .stepfn import StepFn, lp_distance


def phi(rho: DiscreteMeasure, sigma: DiscreteMeasure) -> float:
    """``-W_2^2(rho, sigma) / 2``."""
    return -0.5 * wasserstein(rho, sigma, 2) ** 2


def _phi_q(X: StepFn, Xs: StepFn) -> float:
    return -0.5 * lp_distance(X, Xs, 2) ** 2


def gradient_flow_step(X: StepFn, X_sigma: StepFn, h: float) -> StepFn:
    """Implicit Euler step ``proj_k((X - h X_sigma) / (1 - h))``: the
    minimizer of ``I_K(Y) - |Y - X_sigma|^2/2 + |Y - X|^2/(2h)``."""
    if not 0 < h < 1:
        raise ValueError(f"step size must lie in (0, 1), got {h!r}")
    return proj_k((X - h * X_sigma) / (1.0 - h))


@dataclass(frozen=True)
class FlowPath:
    """Iterates ``X[k]`` at rescaled times ``tau[k]``."""

    tau: np.ndarray
    X: list

    def measures(self) -> list[DiscreteMeasure]:
        from .measures import measure_of
        return [measure_of(x) for x in self.X]

    @property
    def final(self) -> StepFn:
        return self.X[-1]


def gradient_flow_run(rho_eps, rho0, tau_span: float, h: float) -> FlowPath:
    """Implicit Euler from ``rho_eps`` with reference ``rho0`` over
    ``[0, tau_span]``; the step is shrunk so that it divides the span."""
    X = rho_eps if isinstance(rho_eps, StepFn) else quantile(rho_eps)
    Xs = rho0 if isinstance(rho0, StepFn) else quantile(rho0)
    if tau_span < 0:
        raise ValueError("tau_span must be nonnegative")
    n = int(math.ceil(tau_span / h - 1e-12)) if tau_span > 0 else 0
    hh = tau_span / n if n else h
    taus = [0.0]
    path = [X]
    for k in range(n):
        X = gradient_flow_step(X, Xs, hh)
        taus.append((k + 1) * hh)
        path.append(X)
    return FlowPath(np.asarray(taus), path)


def exact_flow(X_start: StepFn, X_sigma: StepFn, tau: float) -> StepFn:
    """Closed form of the flow: ``proj_k(X_sigma + e^tau (X_start - X_sigma))``
    for monotone ``X_start``. Used as a reference for the integrator."""
    return proj_k(X_sigma + math.exp(tau) * (X_start - X_sigma))


def evi_residual(s0: LagrangianState, t: float, eta: DiscreteMeasure,
                 rel_dt: float = 1e-4) -> float:
    """Positive part of ``(t/2) d/dt W^2(rho_t, eta) - W^2(rho_t, eta)/2
    - phi(eta) + phi(rho_t)`` with ``phi`` relative to ``rho_0``.

    The derivative is a central difference with step ``rel_dt * t`` on the
    exact solution.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    Y = quantile(eta)
    dt = rel_dt * t
    Xt = step(s0, t).X
    wp = lp_distance(step(s0, t + dt).X, Y, 2) ** 2
    wm = lp_distance(step(s0, t - dt).X, Y, 2) ** 2
    w = lp_distance(Xt, Y, 2) ** 2
    lhs = 0.5 * t * (wp - wm) / (2.0 * dt) - 0.5 * w
    rhs = _phi_q(Y, s0.X) - _phi_q(Xt, s0.X)
    return max(0.0, lhs - rhs)


def perturbed_initial(state0: MassVelocityState, eps: float) -> StepFn:
    """Quantile of ``(i + eps v0)_# rho0``: the sorted rearrangement of
    ``X0 + eps V0`` cellwise."""
    x = state0.positions + eps * state0.velocities
    order = np.argsort(x, kind="stable")
    return StepFn.from_widths(state0.masses[order], x[order])


def limit_construction(state0: MassVelocityState, t: float, eps_sequence=None,
                       h: float = 1e-3, k_max: int = 6) -> list[tuple[float, float]]:
    """Rows ``(eps, W_2(rho_t, G_{log(t/eps)} rho~_eps))``.

    ``rho~_eps`` is the initial measure pushed by ``i + eps v0`` and ``G``
    the implicit Euler flow with reference ``rho0``; ``eps`` defaults to
    ``t / 2^k`` for ``k = 0..k_max``.
    """
    if eps_sequence is None:
        eps_sequence = [t / 2 ** k for k in range(k_max + 1)]
    s0 = LagrangianState.from_state(state0)
    Xt = step(s0, t).X
    X0 = s0.X
    rows = []
    for eps in eps_sequence:
        if not 0 < eps <= t:
            raise ValueError("eps must lie in (0, t]")
        Xe = perturbed_initial(state0, eps)
        Xg = gradient_flow_run(Xe, X0, math.log(t / eps), h).final
        rows.append((float(eps), lp_distance(Xg, Xt, 2)))
    return rows


def m_eps_bound(state0: MassVelocityState, eps: float) -> float:
    """Upper bound on ``min_u ||v0 - u||_{L^2(rho0)}`` over velocities ``u``
    that are ``1/(2 eps)``-Lipschitz and bounded by ``1/eps``.

    Uses the midpoint of the McShane upper and lower Lipschitz extensions of
    ``v0`` from the atoms, clipped to ``[-1/eps, 1/eps]``; any such ``u`` is
    admissible, so the value is a valid bound.
    """
    x, v, m = state0.positions, state0.velocities, state0.masses
    L = 1.0 / (2.0 * eps)
    d = np.abs(x[:, None] - x[None, :])
    upper = np.min(v[None, :] + L * d, axis=1)
    lower = np.max(v[None, :] - L * d, axis=1)
    u = np.clip(0.5 * (upper + lower), -1.0 / eps, 1.0 / eps)
    return math.sqrt(float(np.dot(m, (v - u) ** 2)))
