"""The cone K of nondecreasing functions in L^2(0, 1).

Metric projection onto K, its plateau structure, projections onto the
plateau subspaces, and membership tests for the polar cone and the
subdifferential of the indicator of K.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .stepfn import Partition, StepFn, primitive


class PlateauSet:
    """Disjoint, ordered open intervals ``(left[i], right[i])`` of (0, 1)."""

    __slots__ = ("left", "right")

    def __init__(self, left, right):
        left = np.array(left, dtype=np.float64, copy=True).reshape(-1)
        right = np.array(right, dtype=np.float64, copy=True).reshape(-1)
        if left.shape != right.shape:
            raise ValueError("left and right ends must match")
        if np.any(right <= left):
            raise ValueError("plateaus must have positive length")
        if np.any(left[1:] < right[:-1]):
            raise ValueError("plateaus must be ordered and disjoint")
        if len(left) and (left[0] < 0.0 or right[-1] > 1.0):
            raise ValueError("plateaus must lie in (0, 1)")
        left.setflags(write=False)
        right.setflags(write=False)
        self.left = left
        self.right = right

    @classmethod
    def empty(cls) -> "PlateauSet":
        return cls([], [])

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.left.tolist(), self.right.tolist()))

    def __len__(self):
        return len(self.left)

    def __iter__(self):
        return iter(self.intervals)

    def locate(self, w) -> np.ndarray:
        """Index of the plateau containing each point, ``-1`` outside."""
        w = np.asarray(w, dtype=np.float64)
        k = np.searchsorted(self.left, w, side="right") - 1
        inside = k >= 0
        kk = np.where(inside, k, 0)
        if len(self.left):
            inside &= (w > self.left[kk]) & (w < self.right[kk])
        else:
            inside &= False
        return np.where(inside, k, -1)

    def issubset(self, other: "PlateauSet") -> bool:
        """Every interval here is contained in one interval of ``other``."""
        if len(self) == 0:
            return True
        if len(other) == 0:
            return False
        k = np.searchsorted(other.left, self.left, side="right") - 1
        if np.any(k < 0):
            return False
        return bool(np.all(other.right[k] >= self.right))

    def __eq__(self, other):
        return (isinstance(other, PlateauSet)
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right))

    def __repr__(self):
        return f"PlateauSet({self.intervals!r})"


def omega(f: StepFn) -> PlateauSet:
    """Maximal open intervals where ``f`` is constant.

    For a canonical step function these are exactly the cell interiors.
    """
    f = f.canonical()
    b = f.breakpoints
    return PlateauSet(b[:-1], b[1:])


def in_cone(f: StepFn) -> bool:
    """Membership in K: canonical values nondecreasing, no tolerance."""
    return f.canonical().is_nondecreasing()


def proj_k(f: StepFn, backend: str | None = None) -> StepFn:
    """L^2 projection onto nondecreasing functions.

    Weighted pool-adjacent-violators on the cells, equivalently the right
    derivative of the convex envelope of the primitive. Runs in O(n).
    ``backend`` picks the kernel implementation (default: the active one).
    """
    widths = np.ascontiguousarray(f.widths)
    values = np.ascontiguousarray(f.values)
    ends, means = _kernels.get_backend(backend).pava(widths, values)
    b = f.breakpoints[np.concatenate(([0], ends))]
    return StepFn(Partition(b), means)


def proj_h(plateaus: PlateauSet, h: StepFn) -> StepFn:
    """Projection onto functions constant on each plateau: average ``h`` over
    every plateau, leave it unchanged elsewhere."""
    if len(plateaus) == 0:
        return h
    b = np.union1d(h.breakpoints, np.concatenate((plateaus.left, plateaus.right)))
    b = b[(b >= 0.0) & (b <= 1.0)]
    part = Partition(b)
    mids = 0.5 * (b[:-1] + b[1:])
    v = h(mids)
    widths = part.widths
    k = plateaus.locate(mids)
    inside = k >= 0
    ki = k[inside]
    n = len(plateaus)
    sums = np.bincount(ki, weights=widths[inside] * v[inside], minlength=n)
    wts = np.bincount(ki, weights=widths[inside], minlength=n)
    out = v.copy()
    out[inside] = sums[ki] / wts[ki]
    return StepFn(part, out)


def in_polar_cone(f: StepFn, tol: float = 0.0) -> bool:
    """Primitive nonnegative (up to ``tol``) and vanishing at 0 and 1."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    F = primitive(f)
    return bool(np.min(F.y) >= -tol and abs(F.y[0]) <= tol and abs(F.y[-1]) <= tol)


def subdifferential_violation(xi: StepFn, g: StepFn) -> float:
    """How far ``xi`` is from the normal cone of K at ``g``.

    Maximum of the negative part of the primitive of ``xi`` and of its
    absolute value at the breakpoints of ``g`` (including 0 and 1).
    """
    g = g.canonical()
    if not g.is_nondecreasing():
        raise ValueError("g must be nondecreasing")
    F = primitive(xi)
    neg = max(0.0, -float(np.min(F.y)))
    at_breaks = np.abs(np.interp(g.breakpoints, F.x, F.y))
    return max(neg, float(np.max(at_breaks)))


def in_subdifferential(xi: StepFn, g: StepFn, tol: float | None = None) -> bool:
    """Membership of ``xi`` in the subdifferential of the indicator of K at
    ``g``; default tolerance ``1e-9 * (1 + sup|xi|)``."""
    if tol is None:
        tol = 1e-9 * (1.0 + xi.sup_norm())
    return subdifferential_violation(xi, g) <= tol


def minimal_selection(g: StepFn, h: StepFn) -> StepFn:
    """Element ``proj_h(omega(g), h) - h`` of the subdifferential at ``g``."""
    return proj_h(omega(g), h) - h


def random_subgradient(g: StepFn, rng: np.random.Generator,
                       n_bumps: int | None = None, scale: float = 1.0) -> StepFn:
    """Random element of the subdifferential of the indicator of K at ``g``.

    Sum of scaled tent derivatives (``+c`` then ``-c`` on a subinterval), each
    supported inside a single plateau of ``g``; their primitives are
    nonnegative tents that vanish off the plateaus.
    """
    pl = omega(g)
    if n_bumps is None:
        n_bumps = int(rng.integers(1, 4))
    pts = [0.0, 1.0]
    bumps = []
    for _ in range(n_bumps):
        k = int(rng.integers(len(pl)))
        a0, b0 = pl.left[k], pl.right[k]
        a, b = np.sort(rng.uniform(a0, b0, size=2))
        if not (a0 < a < b < b0):
            continue
        m = 0.5 * (a + b)
        if not a < m < b:
            continue
        bumps.append((a, m, b, scale * rng.uniform(0.1, 1.0)))
        pts.extend((a, m, b))
    b = np.unique(pts)
    mids = 0.5 * (b[:-1] + b[1:])
    v = np.zeros(len(mids))
    for a, m, e, c in bumps:
        v += np.where((mids > a) & (mids < m), c, 0.0)
        v -= np.where((mids > m) & (mids < e), c, 0.0)
    return StepFn(b, v)
