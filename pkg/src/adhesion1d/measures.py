"""Finitely supported probability measures on the line, with and without a
velocity field, in quantile coordinates.

A measure ``rho`` is identified with its quantile function ``X_rho``, a
nondecreasing step function on [0, 1); a velocity ``v`` on the atoms becomes
``V = v o X_rho``. Transport distances are then L^p distances.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .stepfn import StepFn, lp_distance, refine_common

#: tolerance on the total mass of an in-memory measure
MASS_RTOL = 1e-12
#: tolerance on the total mass read from a file
FILE_MASS_TOL = 1e-9


def _merge_atoms(m, x, *weighted):
    """Sort by position and merge exactly equal positions; extra arrays are
    combined by mass-weighted mean."""
    order = np.argsort(x, kind="stable")
    m, x = m[order], x[order]
    weighted = [w[order] for w in weighted]
    if len(x) > 1 and np.any(x[1:] == x[:-1]):
        starts = np.concatenate(([0], np.flatnonzero(x[1:] != x[:-1]) + 1))
        mm = np.add.reduceat(m, starts)
        weighted = [np.add.reduceat(m * w, starts) / mm for w in weighted]
        m, x = mm, x[starts]
    return (m, x, *weighted)


def _check_masses(m, tol=MASS_RTOL):
    if len(m) == 0:
        raise ValueError("a measure needs at least one atom")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise ValueError("masses must be positive and finite")
    total = float(np.sum(m))
    if abs(total - 1.0) > tol:
        raise ValueError(f"masses sum to {total!r}, expected 1")


class DiscreteMeasure:
    """Probability measure ``sum_i m_i delta_{x_i}`` with ``x`` strictly
    increasing after merging coincident atoms."""

    __slots__ = ("masses", "positions")

    def __init__(self, masses, positions):
        m = np.array(masses, dtype=np.float64, copy=True).reshape(-1)
        x = np.array(positions, dtype=np.float64, copy=True).reshape(-1)
        if m.shape != x.shape:
            raise ValueError("masses and positions must have equal length")
        _check_masses(m)
        if not np.all(np.isfinite(x)):
            raise ValueError("positions must be finite")
        m, x = _merge_atoms(m, x)
        m.setflags(write=False)
        x.setflags(write=False)
        self.masses = m
        self.positions = x

    @classmethod
    def dirac(cls, x: float = 0.0) -> "DiscreteMeasure":
        return cls([1.0], [x])

    def __len__(self):
        return len(self.masses)

    def cdf(self, x):
        """``M(x) = rho((-inf, x])``."""
        c = np.concatenate(([0.0], np.cumsum(self.masses)))
        c[-1] = 1.0
        return c[np.searchsorted(self.positions, x, side="right")]

    def moment(self, p: float = 2) -> float:
        return float(np.dot(self.masses, np.abs(self.positions) ** p))

    def integrate(self, fn: Callable) -> float:
        return float(np.dot(self.masses, fn(self.positions)))

    def __repr__(self):
        return (f"DiscreteMeasure(masses={self.masses.tolist()!r}, "
                f"positions={self.positions.tolist()!r})")


class MassVelocityState:
    """Atoms ``(m_i, x_i, v_i)``: a measure together with a velocity on its
    support. Coincident atoms merge with mass-weighted velocity."""

    __slots__ = ("masses", "positions", "velocities")

    def __init__(self, masses, positions, velocities):
        m = np.array(masses, dtype=np.float64, copy=True).reshape(-1)
        x = np.array(positions, dtype=np.float64, copy=True).reshape(-1)
        v = np.array(velocities, dtype=np.float64, copy=True).reshape(-1)
        if not (m.shape == x.shape == v.shape):
            raise ValueError("masses, positions and velocities must have equal length")
        _check_masses(m)
        if not np.all(np.isfinite(x)):
            raise ValueError("positions must be finite")
        m, x, v = _merge_atoms(m, x, v)
        for a in (m, x, v):
            a.setflags(write=False)
        self.masses = m
        self.positions = x
        self.velocities = v

    def __len__(self):
        return len(self.masses)

    @property
    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.masses, self.positions)

    def quantile(self) -> StepFn:
        return quantile(self.measure)

    def velocity(self) -> StepFn:
        """``V = v o X`` on the quantile partition."""
        return StepFn.from_widths(self.masses, self.velocities)

    def lagrangian(self) -> tuple[StepFn, StepFn]:
        """``(X, V)`` on the shared quantile partition."""
        X = StepFn.from_widths(self.masses, self.positions, canonical=False)
        V = StepFn(X.partition, self.velocities, canonical=False)
        return X, V

    @property
    def momentum(self) -> float:
        return float(np.dot(self.masses, self.velocities))

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.dot(self.masses, self.velocities ** 2))

    def __repr__(self):
        return (f"MassVelocityState(masses={self.masses.tolist()!r}, "
                f"positions={self.positions.tolist()!r}, "
                f"velocities={self.velocities.tolist()!r})")

    # -- csv -----------------------------------------------------------------
    def dumps(self) -> str:
        out = io.StringIO()
        out.write("m,x,v\n")
        for m, x, v in zip(self.masses, self.positions, self.velocities):
            out.write(f"{float(m)!r},{float(x)!r},{float(v)!r}\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text: str, renormalize: bool = False) -> "MassVelocityState":
        """Parse CSV with header ``m,x,v``.

        The mass column must sum to 1 within ``1e-9``; with ``renormalize``
        any positive total is rescaled to 1.
        """
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r and any(c.strip() for c in r)]
        if not rows or [c.strip() for c in rows[0]] != ["m", "x", "v"]:
            raise ValueError("state CSV must start with the header 'm,x,v'")
        data = []
        for k, r in enumerate(rows[1:], start=2):
            if len(r) != 3:
                raise ValueError(f"line {k}: expected 3 columns, got {len(r)}")
            try:
                data.append([float(c) for c in r])
            except ValueError as exc:
                raise ValueError(f"line {k}: {exc}") from None
        if not data:
            raise ValueError("state CSV has no atoms")
        a = np.asarray(data, dtype=np.float64)
        m = a[:, 0]
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValueError("masses must be positive and finite")
        total = float(np.sum(m))
        if not renormalize and abs(total - 1.0) > FILE_MASS_TOL:
            raise ValueError(
                f"masses sum to {total!r}; expected 1 +/- {FILE_MASS_TOL:g} "
                "(use renormalize to rescale)")
        return cls(m / total, a[:, 1], a[:, 2])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_csv(cls, path, renormalize: bool = False) -> "MassVelocityState":
        with open(path) as fh:
            return cls.loads(fh.read(), renormalize=renormalize)


def quantile(rho: DiscreteMeasure) -> StepFn:
    """Pseudo-inverse of the distribution function: value ``x_i`` on a cell
    of width ``m_i``."""
    return StepFn.from_widths(rho.masses, rho.positions)


def measure_of(X: StepFn) -> DiscreteMeasure:
    """Push-forward of Lebesgue measure on (0, 1) by a nondecreasing ``X``."""
    X = X.canonical()
    if not X.is_nondecreasing():
        raise ValueError("measure_of needs a nondecreasing quantile function")
    return DiscreteMeasure(X.widths, X.values)


def wasserstein(r1: DiscreteMeasure, r2: DiscreteMeasure, p: float = 2) -> float:
    """``W_p`` as the L^p distance of quantile functions."""
    return lp_distance(quantile(r1), quantile(r2), p)


# -- convex costs ---------------------------------------------------------------

@dataclass(frozen=True)
class PowerCost:
    """``psi(r) = |r|^p`` with ``p >= 1``."""

    p: float

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"|r|^p is convex only for p >= 1, got p={self.p!r}")

    def __call__(self, r):
        return np.abs(r) ** self.p


class PiecewiseLinearCost:
    """Even convex cost, piecewise linear in ``|r|``.

    ``points`` are ``(r_k, psi(r_k))`` with ``0 = r_0 < r_1 < ...``; past the
    last point the last slope continues (zero slope if only one point).
    """

    def __init__(self, points: Sequence[tuple[float, float]]):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0 or pts[0, 0] != 0.0:
            raise ValueError("the first point must sit at r = 0")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        slopes = np.diff(pts[:, 1]) / np.diff(pts[:, 0])
        # evenness plus convexity: slopes nondecreasing and nonnegative
        if len(slopes) and (slopes[0] < 0 or np.any(np.diff(slopes) < 0)):
            raise ValueError("cost is not convex")
        self.r = pts[:, 0]
        self.y = pts[:, 1]
        self.tail = float(slopes[-1]) if len(slopes) else 0.0

    def __call__(self, r):
        a = np.abs(np.asarray(r, dtype=np.float64))
        out = np.interp(a, self.r, self.y)
        return np.where(a > self.r[-1], self.y[-1] + self.tail * (a - self.r[-1]), out)


def transport_cost(r1: DiscreteMeasure, r2: DiscreteMeasure, psi) -> float:
    """``int_0^1 psi(X_1 - X_2)`` for a convex even cost; the monotone
    coupling is optimal for every such cost."""
    if not isinstance(psi, (PowerCost, PiecewiseLinearCost)):
        raise TypeError("psi must be a PowerCost or PiecewiseLinearCost")
    a, b = refine_common(quantile(r1), quantile(r2))
    return float(np.dot(a.widths, psi(a.values - b.values)))


# -- phase-space distances -------------------------------------------------------

def _pair(m1: MassVelocityState, m2: MassVelocityState):
    X1, V1 = m1.lagrangian()
    X2, V2 = m2.lagrangian()
    part = X1.partition.union(X2.partition)
    return part, X1.on(part), V1.on(part), X2.on(part), V2.on(part)


def _check_p(p):
    if not (1 <= p < math.inf):
        raise ValueError(f"p must lie in [1, inf), got {p!r}")


def u_dist(m1: MassVelocityState, m2: MassVelocityState, p: float = 2) -> float:
    """``U_p = (int_0^1 |V_1 - V_2|^p)^(1/p)`` on the common refinement."""
    _check_p(p)
    part, _, v1, _, v2 = _pair(m1, m2)
    return float(np.dot(part.widths, np.abs(v1 - v2) ** p)) ** (1.0 / p)


def d_dist(m1: MassVelocityState, m2: MassVelocityState, p: float = 2) -> float:
    """``D_p = (W_p^p + U_p^p)^(1/p)``."""
    _check_p(p)
    part, x1, v1, x2, v2 = _pair(m1, m2)
    s = np.dot(part.widths, np.abs(x1 - x2) ** p + np.abs(v1 - v2) ** p)
    return float(s) ** (1.0 / p)


def pseudo_norm(m: MassVelocityState, p: float = 2) -> float:
    """``D_p`` against the state at rest at the origin."""
    _check_p(p)
    s = np.dot(m.masses, np.abs(m.positions) ** p + np.abs(m.velocities) ** p)
    return float(s) ** (1.0 / p)


# -- discretization ----------------------------------------------------------------

def discretize(source, N: int, velocity=None, velocity_in: str = "x") -> MassVelocityState:
    """``N`` equal-mass atoms at the midpoint quantiles ``X((i - 1/2)/N)``.

    ``source`` is a quantile function (a :class:`StepFn` or a callable on
    (0, 1)). ``velocity`` is a callable of position (``velocity_in="x"``) or
    of the quantile variable (``"w"``, callable or StepFn); default zero.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if velocity_in not in ("x", "w"):
        raise ValueError("velocity_in must be 'x' or 'w'")
    w = (np.arange(N) + 0.5) / N
    x = np.asarray(source(w), dtype=np.float64)
    if np.any(np.diff(x) < 0):
        raise ValueError("source quantile function is not nondecreasing")
    if velocity is None:
        v = np.zeros(N)
    elif velocity_in == "x":
        v = np.asarray(velocity(x), dtype=np.float64)
    else:
        v = np.asarray(velocity(w), dtype=np.float64)
    return MassVelocityState(np.full(N, 1.0 / N), x, np.broadcast_to(v, (N,)))


# -- weak-convergence surrogate -----------------------------------------------------

#: bounded Lipschitz test functions for the momentum pairing
WEAK_DICTIONARY: dict[str, Callable] = {
    "tanh": np.tanh,
    "sin": np.sin,
    "cos": np.cos,
    "sin_half": lambda x: np.sin(0.5 * x),
    "cauchy": lambda x: 1.0 / (1.0 + x * x),
    "gauss": lambda x: np.exp(-x * x),
    "clip": lambda x: np.clip(x, -1.0, 1.0),
    "ramp": lambda x: np.clip(x, 0.0, 1.0),
}


def momentum_pairings(m: MassVelocityState) -> np.ndarray:
    """``int zeta v drho`` for every function of :data:`WEAK_DICTIONARY`."""
    mv = m.masses * m.velocities
    return np.array([float(np.dot(mv, z(m.positions))) for z in WEAK_DICTIONARY.values()])


def weak_discrepancy(m1: MassVelocityState, m2: MassVelocityState, p: float = 2) -> float:
    """Finite surrogate of the weak phase-space topology: the largest of
    ``W_p``, the momentum-pairing gaps and the gap in ``int |v|^p drho``."""
    _check_p(p)
    w = wasserstein(m1.measure, m2.measure, p)
    pair = float(np.max(np.abs(momentum_pairings(m1) - momentum_pairings(m2))))
    mom = abs(float(np.dot(m1.masses, np.abs(m1.velocities) ** p))
              - float(np.dot(m2.masses, np.abs(m2.velocities) ** p)))
    return max(w, pair, mom)
