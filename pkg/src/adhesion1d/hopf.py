"""Eulerian side: the cumulative distribution ``M_t`` of the density solves the
scalar conservation law ``dM/dt + d/dx A(M) = 0`` whose flux ``A`` is the
primitive of the initial velocity in quantile coordinates.

:func:`hopf_solution` evaluates the entropy solution exactly through convex
envelopes and Legendre conjugates; :func:`godunov_oracle` is an independent
first-order finite-volume approximation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure, MassVelocityState
from .stepfn import PwLinearFn, legendre, lower_convex_envelope, primitive


@dataclass(frozen=True)
class FluxFunction:
    """``A(w) = int_0^w V0`` on [0, 1]."""

    A: PwLinearFn

    def __post_init__(self):
        if self.A.domain != (0.0, 1.0):
            raise ValueError("flux must live on [0, 1]")
        if self.A.y[0] != 0.0:
            raise ValueError("flux must vanish at 0")

    def __call__(self, u):
        return self.A(u)

    @property
    def max_speed(self) -> float:
        return float(np.max(np.abs(self.A.slopes)))


def flux_of(state0: MassVelocityState) -> FluxFunction:
    return FluxFunction(primitive(state0.lagrangian()[1]))


class CdfSolution:
    """Right-continuous nondecreasing step function of ``x``: 0 before
    ``x[0]``, ``M[k]`` on ``[x[k], x[k+1])``."""

    __slots__ = ("x", "M", "t")

    def __init__(self, x, M, t: float = 0.0):
        x = np.array(x, dtype=np.float64, copy=True).reshape(-1)
        M = np.array(M, dtype=np.float64, copy=True).reshape(-1)
        if x.shape != M.shape or len(x) == 0:
            raise ValueError("x and M must be nonempty with equal length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("jump locations must be strictly increasing")
        x.setflags(write=False)
        M.setflags(write=False)
        self.x, self.M, self.t = x, M, float(t)

    @classmethod
    def of_measure(cls, rho: DiscreteMeasure, t: float = 0.0) -> "CdfSolution":
        M = np.cumsum(rho.masses)
        M[-1] = 1.0
        return cls(rho.positions, M, t)

    def __call__(self, x):
        k = np.searchsorted(self.x, x, side="right") - 1
        return np.where(k >= 0, self.M[np.maximum(k, 0)], 0.0)

    def masses(self) -> np.ndarray:
        return np.diff(np.concatenate(([0.0], self.M)))

    def merged(self, atol: float = 1e-9) -> "CdfSolution":
        """Collapse jump locations closer than ``atol`` (keeps the last
        ``M``, i.e. the right limit of the group)."""
        if len(self.x) < 2:
            return self
        new = np.concatenate(([True], np.diff(self.x) > atol))
        last = np.concatenate((np.flatnonzero(new)[1:] - 1, [len(self.x) - 1]))
        return CdfSolution(self.x[new], self.M[last], self.t)

    def l1_distance(self, other: "CdfSolution") -> float:
        """``int |M_1 - M_2| dx`` over the union of both supports, exact."""
        b = np.union1d(self.x, other.x)
        if len(b) < 2:
            return 0.0
        mids = b[:-1]
        d = np.abs(self(mids) - other(mids))
        return float(np.dot(np.diff(b), d))

    def csv(self) -> str:
        out = io.StringIO()
        out.write("x,M\n")
        for x, m in zip(self.x, self.M):
            out.write(f"{float(x)!r},{float(m)!r}\n")
        return out.getvalue()

    def __repr__(self):
        return f"CdfSolution(x={self.x.tolist()!r}, M={self.M.tolist()!r}, t={self.t!r})"


def cdf_discrepancy(a: CdfSolution, b: CdfSolution, merge_atol: float = 1e-9) -> float:
    """Largest gap in jump locations and CDF values after merging jumps
    closer than ``merge_atol``; ``inf`` if the atom counts differ."""
    a, b = a.merged(merge_atol), b.merged(merge_atol)
    if len(a.x) != len(b.x):
        return math.inf
    return float(max(np.max(np.abs(a.x - b.x)), np.max(np.abs(a.M - b.M))))


def hopf_solution(state0: MassVelocityState, t: float) -> CdfSolution:
    """Entropy solution at time ``t`` by conjugate duality.

    ``F_t`` is the convex envelope of ``F_0 + t A`` with ``F_0`` the
    primitive of the initial quantile; its conjugate ``G_t`` has the CDF as
    derivative. Knots of ``G_t`` are the atom positions and its slopes are
    the CDF values between them.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    X0, V0 = state0.lagrangian()
    F0 = primitive(X0)
    A = primitive(V0)
    Ft = lower_convex_envelope(F0 + A * float(t)) if t > 0 else lower_convex_envelope(F0)
    G = legendre(Ft)
    M = np.concatenate((G.slopes, [G.right_slope]))
    M[-1] = 1.0
    return CdfSolution(G.x, M, t)


def _sparse_table(vals, op):
    table = [vals]
    k = 1
    while 2 * k <= len(vals):
        prev = table[-1]
        table.append(op(prev[:-k], prev[k:]))
        k *= 2
    return table


def _range_query(table, lo, hi, op, empty):
    """``op`` over ``vals[lo:hi]`` per query; ``empty`` where ``lo >= hi``."""
    n = hi - lo
    out = np.full(lo.shape, empty, dtype=np.float64)
    ok = n > 0
    if not ok.any():
        return out
    lvl = np.zeros_like(n)
    lvl[ok] = np.floor(np.log2(n[ok])).astype(np.int64)
    for j in np.unique(lvl[ok]):
        sel = ok & (lvl == j)
        row = table[j]
        a = lo[sel]
        b = hi[sel] - (1 << j)
        out[sel] = op(row[a], row[b])
    return out


class _GodunovFlux:
    """Exact Godunov flux for a piecewise-linear flux: extremes of ``A`` on an
    interval are attained at its ends or at knots inside."""

    def __init__(self, A: PwLinearFn):
        self.A = A
        self.kx = np.asarray(A.x)
        self.ky = np.asarray(A.y)
        self.tmin = _sparse_table(self.ky, np.minimum)
        self.tmax = _sparse_table(self.ky, np.maximum)

    def __call__(self, ul, ur):
        # round-off can leave states an ulp outside the flux domain
        ul = np.clip(ul, 0.0, 1.0)
        ur = np.clip(ur, 0.0, 1.0)
        lo_u = np.minimum(ul, ur)
        hi_u = np.maximum(ul, ur)
        # knots strictly inside (lo_u, hi_u)
        i0 = np.searchsorted(self.kx, lo_u, side="right")
        i1 = np.searchsorted(self.kx, hi_u, side="left")
        i1 = np.maximum(i1, i0)
        fa = self.A(ul)
        fb = self.A(ur)
        inner_min = _range_query(self.tmin, i0, i1, np.minimum, np.inf)
        inner_max = _range_query(self.tmax, i0, i1, np.maximum, -np.inf)
        fmin = np.minimum(np.minimum(fa, fb), inner_min)
        fmax = np.maximum(np.maximum(fa, fb), inner_max)
        return np.where(ul <= ur, fmin, fmax)


def _cdf_cell_averages(rho: DiscreteMeasure, edges):
    # int_{-inf}^{e} M = sum_i m_i (e - x_i)_+
    prim = np.maximum(edges[:, None] - rho.positions[None, :], 0.0) @ rho.masses
    return np.diff(prim) / np.diff(edges)


def godunov_oracle(state0: MassVelocityState, t: float, dx: float,
                   cfl: float = 0.9, margin: int = 4) -> CdfSolution:
    """First-order Godunov scheme for the CDF on a uniform grid.

    Cell averages of the exact initial CDF; ghost states 0 and 1 outside the
    domain, which covers the support swept by the extreme velocities.
    Returns the grid CDF as a step function over the cells.
    """
    if not dx > 0:
        raise ValueError("dx must be positive")
    if not (0 < cfl <= 0.9):
        raise ValueError(f"CFL number must lie in (0, 0.9], got {cfl!r}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    rho = state0.measure
    flux = flux_of(state0)
    v = state0.velocities
    lo = float(rho.positions[0] + min(0.0, float(v.min())) * t) - margin * dx
    hi = float(rho.positions[-1] + max(0.0, float(v.max())) * t) + margin * dx
    n = int(math.ceil((hi - lo) / dx))
    edges = lo + dx * np.arange(n + 1)
    M = _cdf_cell_averages(rho, edges)
    speed = flux.max_speed
    if t > 0 and speed > 0:
        steps = int(math.ceil(t * speed / (cfl * dx)))
        dt = t / steps
        G = _GodunovFlux(flux.A)
        lam = dt / dx
        for _ in range(steps):
            ext = np.concatenate(([0.0], M, [1.0]))
            F = G(ext[:-1], ext[1:])
            M = M - lam * (F[1:] - F[:-1])
    x = np.concatenate((edges[:-1], [edges[-1]]))
    Mv = np.concatenate((M, [1.0]))
    return CdfSolution(x, Mv, t)
