"""Exact algebra of step functions on [0, 1) and continuous piecewise-linear
functions.

Step functions carry quantile functions, velocities and generic elements of
L^2(0, 1); piecewise-linear functions carry their primitives, convex
envelopes and Legendre conjugates. Everything is exact on the stored
breakpoints: no grids, no quadrature.
"""

from __future__ import annotations

import io
import math
from typing import Callable

import numpy as np

from . import _kernels

#: adjacent values within ``MERGE_RTOL * (1 + max|value|)`` are merged
MERGE_RTOL = 1e-12


def _readonly(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _runs(values, rtol):
    """Start indices of maximal runs of adjacent values equal within tolerance."""
    n = len(values)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    scale = 1.0 + float(np.max(np.abs(values))) if n else 1.0
    if not math.isfinite(scale):
        same = values[1:] == values[:-1]
    else:
        same = np.abs(np.diff(values)) <= rtol * scale
    return np.concatenate(([0], np.flatnonzero(~same) + 1))


class Partition:
    """Breakpoints ``0 = w_0 < w_1 < ... < w_n = 1`` of [0, 1)."""

    __slots__ = ("breakpoints",)

    def __init__(self, breakpoints):
        w = _readonly(breakpoints)
        if w.ndim != 1 or len(w) < 2:
            raise ValueError("a partition needs at least two breakpoints")
        if w[0] != 0.0 or w[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if not np.all(np.diff(w) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.breakpoints = w

    @property
    def n_cells(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def union(self, other: "Partition") -> "Partition":
        if other is self or np.array_equal(other.breakpoints, self.breakpoints):
            return self
        return Partition(np.union1d(self.breakpoints, other.breakpoints))

    def cell_index(self, w) -> np.ndarray:
        """Index of the cell ``[w_{i-1}, w_i)`` containing each point."""
        idx = np.searchsorted(self.breakpoints, w, side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def __eq__(self, other):
        return (isinstance(other, Partition)
                and np.array_equal(self.breakpoints, other.breakpoints))

    def __hash__(self):
        return hash(self.breakpoints.tobytes())

    def __repr__(self):
        return f"Partition({self.breakpoints.tolist()!r})"


class StepFn:
    """Right-continuous piecewise-constant function on [0, 1).

    ``values[i]`` is the value on ``[w_i, w_{i+1})``. By default the
    representation is canonical: adjacent cells with equal values (up to
    :data:`MERGE_RTOL`) are merged, the merged value being the width-weighted
    mean of the run. Pass ``canonical=False`` to keep a given partition.
    """

    __slots__ = ("partition", "values")

    def __init__(self, breakpoints, values, canonical: bool = True):
        part = breakpoints if isinstance(breakpoints, Partition) else Partition(breakpoints)
        v = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        if len(v) != part.n_cells:
            raise ValueError(
                f"{len(v)} values for a partition with {part.n_cells} cells")
        if canonical and len(v) > 1:
            starts = _runs(v, MERGE_RTOL)
            if len(starts) < len(v):
                widths = part.widths
                sums = np.add.reduceat(widths * v, starts)
                wsum = np.add.reduceat(widths, starts)
                lo = np.minimum.reduceat(v, starts)
                hi = np.maximum.reduceat(v, starts)
                v = np.where(lo == hi, lo, sums / wsum)
                part = Partition(part.breakpoints[np.append(starts, len(widths))])
        v.setflags(write=False)
        self.partition = part
        self.values = v

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "StepFn":
        return cls([0.0, 1.0], [c])

    @classmethod
    def indicator(cls, a: float, b: float) -> "StepFn":
        """Indicator of ``[a, b)`` intersected with [0, 1)."""
        pts = sorted({0.0, 1.0, *(min(max(c, 0.0), 1.0) for c in (a, b))})
        w = np.array(pts)
        mids = 0.5 * (w[:-1] + w[1:])
        return cls(w, ((mids >= a) & (mids < b)).astype(float))

    @classmethod
    def from_widths(cls, widths, values, canonical: bool = True) -> "StepFn":
        """Cells given by positive widths summing to one (last breakpoint
        snapped to exactly 1)."""
        widths = np.asarray(widths, dtype=np.float64)
        if np.any(widths <= 0):
            raise ValueError("cell widths must be positive")
        w = np.concatenate(([0.0], np.cumsum(widths)))
        if abs(w[-1] - 1.0) > 1e-9:
            raise ValueError(f"cell widths sum to {w[-1]!r}, expected 1")
        w[-1] = 1.0
        return cls(w, values, canonical=canonical)

    # -- basic accessors -----------------------------------------------------
    @property
    def breakpoints(self) -> np.ndarray:
        return self.partition.breakpoints

    @property
    def widths(self) -> np.ndarray:
        return self.partition.widths

    @property
    def n_cells(self) -> int:
        return self.partition.n_cells

    @property
    def is_canonical(self) -> bool:
        return len(_runs(self.values, MERGE_RTOL)) == len(self.values)

    def canonical(self) -> "StepFn":
        return self if self.is_canonical else StepFn(self.partition, self.values)

    def __call__(self, w):
        return self.values[self.partition.cell_index(w)]

    def on(self, partition: Partition) -> np.ndarray:
        """Values on the cells of a refinement ``partition``."""
        b = partition.breakpoints
        return self(0.5 * (b[:-1] + b[1:]))

    def integral(self) -> float:
        return float(np.dot(self.widths, self.values))

    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def norm(self, p: float = 2) -> float:
        return lp_distance(self, StepFn.constant(0.0), p)

    def dot(self, other: "StepFn") -> float:
        """L^2(0, 1) inner product."""
        part, a, b = _common(self, other)
        return float(np.dot(part.widths, a * b))

    def primitive(self) -> "PwLinearFn":
        return primitive(self)

    # -- arithmetic ------------------------------------------------------------
    def combine(self, other: "StepFn", op: Callable) -> "StepFn":
        part, a, b = _common(self, other)
        return StepFn(part, op(a, b))

    def map(self, fn: Callable) -> "StepFn":
        return StepFn(self.partition, fn(self.values))

    def __add__(self, other):
        if isinstance(other, StepFn):
            return self.combine(other, np.add)
        return self.map(lambda v: v + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, StepFn):
            return self.combine(other, np.subtract)
        return self.map(lambda v: v - other)

    def __rsub__(self, other):
        return self.map(lambda v: other - v)

    def __mul__(self, c):
        if isinstance(c, StepFn):
            return self.combine(c, np.multiply)
        return self.map(lambda v: v * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.map(lambda v: v / c)

    def __neg__(self):
        return self.map(np.negative)

    def allclose(self, other: "StepFn", atol: float = 1e-12) -> bool:
        part, a, b = _common(self, other)
        return bool(np.all(np.abs(a - b) <= atol))

    def __eq__(self, other):
        """Exact equality of breakpoints and values (no canonicalization)."""
        return (isinstance(other, StepFn) and self.partition == other.partition
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self):
        return (f"StepFn(breakpoints={self.breakpoints.tolist()!r}, "
                f"values={self.values.tolist()!r})")

    # -- serialization -----------------------------------------------------------
    def dumps(self) -> str:
        """CSV rows ``w_left,value`` and a closing ``1.0,`` row. ``repr``
        floats give the shortest string that round-trips exactly."""
        out = io.StringIO()
        for w, v in zip(self.breakpoints[:-1], self.values):
            out.write(f"{float(w)!r},{float(v)!r}\n")
        out.write("1.0,\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text: str, canonical: bool = True) -> "StepFn":
        ws, vs = [], []
        closed = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            left, _, right = line.partition(",")
            if left.strip() == "w_left":
                continue
            if closed:
                raise ValueError("rows after the closing sentinel")
            if right.strip() == "":
                if float(left) != 1.0:
                    raise ValueError("closing sentinel must be 1.0")
                closed = True
                continue
            ws.append(float(left))
            vs.append(float(right))
        if not closed:
            raise ValueError("missing closing sentinel row '1.0,'")
        return cls(ws + [1.0], vs, canonical=canonical)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_csv(cls, path) -> "StepFn":
        with open(path) as fh:
            return cls.loads(fh.read())


def _common(a: StepFn, b: StepFn):
    part = a.partition.union(b.partition)
    va = a.values if part is a.partition else a.on(part)
    vb = b.values if part is b.partition else b.on(part)
    return part, va, vb


def common_values(*fns: StepFn) -> tuple[Partition, list[np.ndarray]]:
    """Cell values of several step functions on the union of their
    breakpoints."""
    part = fns[0].partition
    for f in fns[1:]:
        part = part.union(f.partition)
    return part, [f.values if f.partition is part else f.on(part) for f in fns]


def refine_common(a: StepFn, b: StepFn) -> tuple[StepFn, StepFn]:
    """Both functions on the union of their breakpoints (non-canonical, so
    the two results share one :class:`Partition`)."""
    part, va, vb = _common(a, b)
    return StepFn(part, va, canonical=False), StepFn(part, vb, canonical=False)


def lp_distance(a: StepFn, b: StepFn, p: float = 2) -> float:
    """``||a - b||_{L^p(0,1)}``, exact cellwise; ``p = inf`` gives the sup."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p!r}")
    part, va, vb = _common(a, b)
    d = np.abs(va - vb)
    if math.isinf(p):
        return float(np.max(d))
    if p == 1:
        return float(np.dot(part.widths, d))
    if p == 2:
        return math.sqrt(float(np.dot(part.widths, d * d)))
    return float(np.dot(part.widths, d ** p)) ** (1.0 / p)


class PwLinearFn:
    """Continuous piecewise-linear function through ``knots``.

    Without extensions the function lives on ``[x_0, x_n]`` and is ``+inf``
    outside. ``left_slope`` / ``right_slope`` continue it affinely past the
    first / last knot, which is how Legendre conjugates of compactly
    supported functions are represented. Interior knots with equal left and
    right slopes are dropped.
    """

    __slots__ = ("x", "y", "left_slope", "right_slope")

    def __init__(self, x, y, left_slope: float | None = None,
                 right_slope: float | None = None, canonical: bool = True):
        x = np.array(x, dtype=np.float64, copy=True).reshape(-1)
        y = np.array(y, dtype=np.float64, copy=True).reshape(-1)
        if len(x) != len(y) or len(x) == 0:
            raise ValueError("knots need matching, nonempty x and y")
        if np.any(np.diff(x) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")
        if canonical and len(x) > 1:
            s = np.diff(y) / np.diff(x)
            full = np.concatenate((
                [left_slope if left_slope is not None else np.nan], s,
                [right_slope if right_slope is not None else np.nan]))
            finite = full[np.isfinite(full)]
            scale = 1.0 + (float(np.max(np.abs(finite))) if len(finite) else 0.0)
            before, after = full[:-1], full[1:]
            redundant = np.abs(after - before) <= MERGE_RTOL * scale
            redundant &= np.isfinite(before) & np.isfinite(after)
            keep = ~redundant
            if not keep.any():
                keep[0] = True
            x, y = x[keep], y[keep]
        x.setflags(write=False)
        y.setflags(write=False)
        self.x = x
        self.y = y
        self.left_slope = None if left_slope is None else float(left_slope)
        self.right_slope = None if right_slope is None else float(right_slope)

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    @property
    def slopes(self) -> np.ndarray:
        """Slopes of the segments between consecutive knots."""
        return np.diff(self.y) / np.diff(self.x)

    @property
    def domain(self) -> tuple[float, float]:
        lo = -math.inf if self.left_slope is not None else float(self.x[0])
        hi = math.inf if self.right_slope is not None else float(self.x[-1])
        return lo, hi

    def all_slopes(self) -> np.ndarray:
        """Segment slopes with the extension slopes (when present) at the ends."""
        parts = []
        if self.left_slope is not None:
            parts.append([self.left_slope])
        parts.append(self.slopes)
        if self.right_slope is not None:
            parts.append([self.right_slope])
        return np.concatenate(parts)

    def is_convex(self, rtol: float = 1e-9) -> bool:
        s = self.all_slopes()
        if len(s) < 2:
            return True
        scale = 1.0 + float(np.max(np.abs(s)))
        return bool(np.all(np.diff(s) >= -rtol * scale))

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.interp(t, self.x, self.y)
        lo = t < self.x[0]
        hi = t > self.x[-1]
        if self.left_slope is None:
            out = np.where(lo, np.inf, out)
        else:
            out = np.where(lo, self.y[0] + self.left_slope * (t - self.x[0]), out)
        if self.right_slope is None:
            out = np.where(hi, np.inf, out)
        else:
            out = np.where(hi, self.y[-1] + self.right_slope * (t - self.x[-1]), out)
        return out if out.ndim else float(out)

    def _binary(self, other: "PwLinearFn", op) -> "PwLinearFn":
        if self.domain != other.domain:
            raise ValueError("functions live on different domains")
        xs = np.union1d(self.x, other.x)
        ls = rs = None
        if self.left_slope is not None:
            ls = op(self.left_slope, other.left_slope)
        if self.right_slope is not None:
            rs = op(self.right_slope, other.right_slope)
        return PwLinearFn(xs, op(self(xs), other(xs)), ls, rs)

    def __add__(self, other):
        if isinstance(other, PwLinearFn):
            return self._binary(other, lambda a, b: a + b)
        return PwLinearFn(self.x, self.y + other, self.left_slope, self.right_slope)

    def __sub__(self, other):
        if isinstance(other, PwLinearFn):
            return self._binary(other, lambda a, b: a - b)
        return PwLinearFn(self.x, self.y - other, self.left_slope, self.right_slope)

    def __mul__(self, c):
        c = float(c)
        return PwLinearFn(
            self.x, self.y * c,
            None if self.left_slope is None else self.left_slope * c,
            None if self.right_slope is None else self.right_slope * c)

    __rmul__ = __mul__

    def derivative(self) -> StepFn:
        """Right derivative as a step function; the domain must be [0, 1]."""
        if self.domain != (0.0, 1.0):
            raise ValueError("derivative as StepFn needs the domain [0, 1]")
        return StepFn(self.x, self.slopes)

    def allclose(self, other: "PwLinearFn", atol: float = 1e-12) -> bool:
        if self.domain != other.domain:
            return False
        xs = np.union1d(self.x, other.x)
        if not np.all(np.abs(self(xs) - other(xs)) <= atol):
            return False
        for a, b in ((self.left_slope, other.left_slope),
                     (self.right_slope, other.right_slope)):
            if (a is None) != (b is None):
                return False
            if a is not None and abs(a - b) > atol:
                return False
        return True

    def __repr__(self):
        ext = ""
        if self.left_slope is not None or self.right_slope is not None:
            ext = f", left_slope={self.left_slope!r}, right_slope={self.right_slope!r}"
        return f"PwLinearFn(knots={self.knots!r}{ext})"


def primitive(f: StepFn) -> PwLinearFn:
    """``F(w) = int_0^w f``; knots at the breakpoints of ``f``."""
    y = np.concatenate(([0.0], np.cumsum(f.widths * f.values)))
    return PwLinearFn(f.breakpoints, y)


def lower_convex_envelope(F: PwLinearFn) -> PwLinearFn:
    """Largest convex function below ``F`` on its compact domain.

    Lower hull of the knots in one left-to-right monotone-chain pass; it
    agrees with ``F`` at both endpoints.
    """
    if F.left_slope is not None or F.right_slope is not None:
        raise ValueError("convex envelope is defined here on a compact interval")
    idx = _kernels.lower_hull(np.ascontiguousarray(F.x), np.ascontiguousarray(F.y))
    return PwLinearFn(F.x[idx], F.y[idx])


def legendre(F: PwLinearFn) -> PwLinearFn:
    """Convex conjugate ``F*(s) = sup_w (s w - F(w))``.

    The graph is transposed exactly: slopes of ``F`` become knot abscissae
    of ``F*`` and knot abscissae of ``F`` become slopes. A compact domain
    ``[a, b]`` turns into affine continuation with slopes ``a`` and ``b``
    beyond the extreme slopes of ``F``, and vice versa, so that
    ``legendre(legendre(F))`` recovers ``F``.
    """
    if not F.is_convex():
        raise ValueError("legendre needs a convex input; apply lower_convex_envelope first")
    x, y = F.x, F.y
    seg = F.slopes
    knots_s = []
    knots_v = []
    if F.left_slope is not None:
        knots_s.append(F.left_slope)
        knots_v.append(F.left_slope * x[0] - y[0])
    for i, s in enumerate(seg):
        knots_s.append(s)
        knots_v.append(s * x[i] - y[i])
    if F.right_slope is not None:
        knots_s.append(F.right_slope)
        knots_v.append(F.right_slope * x[-1] - y[-1])
    ks = np.asarray(knots_s, dtype=np.float64)
    kv = np.asarray(knots_v, dtype=np.float64)
    # round-off may produce slopes that tie or step back by an ulp
    ks = np.maximum.accumulate(ks)
    keep = np.concatenate(([True], np.diff(ks) > 0))
    ks, kv = ks[keep], kv[keep]
    left = float(x[0]) if F.left_slope is None else None
    right = float(x[-1]) if F.right_slope is None else None
    return PwLinearFn(ks, kv, left_slope=left, right_slope=right)

