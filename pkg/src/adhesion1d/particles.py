"""Event-driven sticky particle system.

Particles fly freely and merge on contact, conserving mass and momentum.
Each cluster stores its mass ``M``, ``P = sum m_j (x_j - t_0 v_j)`` and
momentum ``Q = sum m_j v_j``, so its position at any time ``t`` is
``(P + t Q) / M``: exact affine motion from the data, with no per-step drift.
Adjacent pairs are scheduled in a heap keyed by collision time; stale entries
are recognised by version stamps.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .measures import MassVelocityState
from .stepfn import StepFn

#: collisions closer than ``EVENT_RTOL * max(1, |t|)`` are simultaneous
EVENT_RTOL = 1e-12
#: absolute gap below which a pair counts as touching in :meth:`merge`
TOUCH_ATOL = 1e-12


@dataclass(frozen=True)
class CollisionEvent:
    """One merge: particles ``first_index..last_index`` (inclusive, original
    indices) form one cluster at ``time``."""

    time: float
    first_index: int
    last_index: int
    pre_velocities: tuple
    pre_masses: tuple
    post_velocity: float


class ParticleSystem:
    """Finite sticky particle system started from a :class:`MassVelocityState`.

    Particle ``i`` is atom ``i`` of the (sorted, merged) initial state.
    :meth:`evolve` advances in place and returns ``self``.
    """

    def __init__(self, state: MassVelocityState, t0: float = 0.0,
                 rel_tol: float = EVENT_RTOL, backend: str | None = None):
        n = len(state)
        m = np.array(state.masses, dtype=np.float64)
        x = np.array(state.positions, dtype=np.float64)
        v = np.array(state.velocities, dtype=np.float64)
        self.n_particles = n
        self.time = float(t0)
        self.rel_tol = float(rel_tol)
        self._kern = _kernels.get_backend(backend)
        self.initial = state
        self.M = m
        self.P = m * x - float(t0) * (m * v)
        self.Q = m * v
        idx = np.arange(n, dtype=np.int64)
        self.nxt = idx + 1
        self.nxt[-1] = -1
        self.prv = idx - 1
        self.first = idx.copy()
        self.last = idx.copy()
        self.alive = np.ones(n, dtype=np.int8)
        self.version = np.zeros(n, dtype=np.int64)
        cap = max(n, 1)
        self.ev_time = np.empty(cap)
        self.ev_first = np.empty(cap, dtype=np.int64)
        self.ev_last = np.empty(cap, dtype=np.int64)
        self.ev_post = np.empty(cap)
        self.ev_pre_ptr = np.zeros(cap + 1, dtype=np.int64)
        self.ev_pre_vals = np.empty(2 * cap)
        self.ev_pre_mass = np.empty(2 * cap)
        self.n_events = 0
        self._n_pre = 0

    @classmethod
    def from_arrays(cls, m, x, v, **kw) -> "ParticleSystem":
        return cls(MassVelocityState(m, x, v), **kw)

    def copy(self) -> "ParticleSystem":
        new = object.__new__(ParticleSystem)
        for k, val in self.__dict__.items():
            setattr(new, k, val.copy() if isinstance(val, np.ndarray) else val)
        return new

    # -- cluster views -----------------------------------------------------------
    def _slots(self) -> np.ndarray:
        # merged chains live in their leftmost slot, so slot order is spatial order
        return np.flatnonzero(self.alive)

    @property
    def n_clusters(self) -> int:
        return int(np.count_nonzero(self.alive))

    def clusters(self, t: float | None = None) -> dict[str, np.ndarray]:
        """Cluster arrays at the current time (or at ``t`` by free flight,
        valid until the next collision)."""
        t = self.time if t is None else float(t)
        s = self._slots()
        M, P, Q = self.M[s], self.P[s], self.Q[s]
        return {
            "m": M,
            "x": (P + t * Q) / M,
            "v": Q / M,
            "first": self.first[s],
            "last": self.last[s],
        }

    def state_of(self) -> MassVelocityState:
        c = self.clusters()
        return MassVelocityState(c["m"], c["x"], c["v"])

    def particle_values(self) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity of every original particle (its cluster's)."""
        c = self.clusters()
        reps = c["last"] - c["first"] + 1
        return np.repeat(c["x"], reps), np.repeat(c["v"], reps)

    def lagrangian(self) -> tuple[StepFn, StepFn]:
        """``(X, V)`` on the initial quantile partition."""
        x, v = self.particle_values()
        X0, _ = self.initial.lagrangian()
        return StepFn(X0.partition, x), StepFn(X0.partition, v)

    @property
    def momentum(self) -> float:
        return float(np.sum(self.Q[self._slots()]))

    @property
    def mass(self) -> float:
        return float(np.sum(self.M[self._slots()]))

    def kinetic_energy(self) -> float:
        s = self._slots()
        return 0.5 * float(np.sum(self.Q[s] ** 2 / self.M[s]))

    # -- events ------------------------------------------------------------------------
    @property
    def events(self) -> list[CollisionEvent]:
        out = []
        for k in range(self.n_events):
            a, b = self.ev_pre_ptr[k], self.ev_pre_ptr[k + 1]
            out.append(CollisionEvent(
                float(self.ev_time[k]), int(self.ev_first[k]), int(self.ev_last[k]),
                tuple(self.ev_pre_vals[a:b].tolist()),
                tuple(self.ev_pre_mass[a:b].tolist()),
                float(self.ev_post[k])))
        return out

    def event_times(self) -> np.ndarray:
        return self.ev_time[:self.n_events].copy()

    def next_collision(self) -> tuple[float, list[tuple[int, int]]] | None:
        """Earliest future collision time and every adjacent cluster pair
        (indices into the current cluster order) colliding then."""
        s = self._slots()
        if len(s) < 2:
            return None
        v = self.Q[s] / self.M[s]
        x0 = self.P[s] / self.M[s]
        closing = v[:-1] > v[1:]
        if not closing.any():
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = np.where(closing, (x0[1:] - x0[:-1]) / (v[:-1] - v[1:]), np.inf)
        tc = np.maximum(tc, self.time)
        t_star = float(np.min(tc))
        window = t_star + self.rel_tol * max(1.0, abs(t_star))
        pairs = [(int(i), int(i) + 1) for i in np.flatnonzero(tc <= window)]
        return t_star, pairs

    def _grow_log(self, extra_events: int, extra_pre: int) -> None:
        need_ev = self.n_events + extra_events
        if need_ev > len(self.ev_time):
            grow = max(need_ev, 2 * len(self.ev_time))
            for name in ("ev_time", "ev_first", "ev_last", "ev_post"):
                a = getattr(self, name)
                b = np.empty(grow, dtype=a.dtype)
                b[:len(a)] = a
                setattr(self, name, b)
            ptr = np.zeros(grow + 1, dtype=np.int64)
            ptr[:len(self.ev_pre_ptr)] = self.ev_pre_ptr
            self.ev_pre_ptr = ptr
        need_pre = self._n_pre + extra_pre
        if need_pre > len(self.ev_pre_vals):
            grow = max(need_pre, 2 * len(self.ev_pre_vals))
            for name in ("ev_pre_vals", "ev_pre_mass"):
                a = getattr(self, name)
                b = np.empty(grow)
                b[:len(a)] = a
                setattr(self, name, b)

    def merge(self, pairs: Iterable[tuple[int, int]]) -> "ParticleSystem":
        """Merge touching adjacent cluster pairs at the current time.

        Pairs are ``(i, i + 1)`` indices into the current cluster order; each
        maximal chain of listed pairs becomes one cluster with the
        mass-weighted mean velocity.
        """
        pairs = sorted({(int(a), int(b)) for a, b in pairs})
        s = self._slots()
        x = (self.P[s] + self.time * self.Q[s]) / self.M[s]
        lefts = []
        for a, b in pairs:
            if b != a + 1 or a < 0 or b >= len(s):
                raise ValueError(f"pair {(a, b)} is not an adjacent cluster pair")
            if abs(x[b] - x[a]) > TOUCH_ATOL:
                raise ValueError(f"clusters {a} and {b} are not in contact")
            lefts.append(a)
        self._grow_log(len(lefts), 2 * len(lefts))
        i = 0
        while i < len(lefts):
            a = lefts[i]
            b = a + 1
            while i + 1 < len(lefts) and lefts[i + 1] == b:
                i += 1
                b += 1
            chain = s[a:b + 1]
            k, p = self.n_events, self._n_pre
            self.ev_pre_ptr[k] = p
            self.ev_pre_vals[p:p + len(chain)] = self.Q[chain] / self.M[chain]
            self.ev_pre_mass[p:p + len(chain)] = self.M[chain]
            self._n_pre += len(chain)
            head, tail = chain[0], chain[-1]
            mass = 0.0
            pint = 0.0
            mom = 0.0
            for c in chain:
                mass += self.M[c]
                pint += self.P[c]
                mom += self.Q[c]
            self.M[head], self.P[head], self.Q[head] = mass, pint, mom
            self.alive[chain[1:]] = 0
            self.last[head] = self.last[tail]
            after = self.nxt[tail]
            self.nxt[head] = after
            if after >= 0:
                self.prv[after] = head
            self.version[head] += 1
            self.ev_time[k] = self.time
            self.ev_first[k] = self.first[head]
            self.ev_last[k] = self.last[head]
            self.ev_post[k] = mom / mass
            self.n_events += 1
            self.ev_pre_ptr[k + 1] = self._n_pre
            i += 1
        return self

    def evolve(self, t_target: float) -> "ParticleSystem":
        """Advance through every collision up to ``t_target`` (inclusive:
        the state is right-continuous at event times)."""
        t_target = float(t_target)
        if t_target < self.time:
            raise ValueError(f"cannot evolve backwards from {self.time} to {t_target}")
        n_left = self.n_clusters
        self._grow_log(n_left, 2 * n_left)
        self.n_events, self._n_pre = self._kern.sps_evolve(
            self.M, self.P, self.Q, self.nxt, self.prv, self.last, self.first,
            self.alive, self.version, self.time, t_target, self.rel_tol,
            self.ev_time, self.ev_first, self.ev_last, self.ev_post,
            self.ev_pre_ptr, self.ev_pre_vals, self.ev_pre_mass,
            self.n_events, self._n_pre)
        if not math.isinf(t_target):
            self.time = t_target
        elif self.n_events:
            self.time = max(self.time, float(self.ev_time[self.n_events - 1]))
        return self

    def run_to_completion(self) -> "ParticleSystem":
        """Process every collision; time ends at the last event."""
        return self.evolve(math.inf)

    # -- trajectory output -------------------------------------------------------------
    def trajectory(self, times: Sequence[float]) -> list[tuple]:
        """Rows ``(t, cluster_id, m, x, v)`` at each time of a nondecreasing
        grid; ``cluster_id`` is the first original particle of the cluster.
        Runs on a copy."""
        sys = self.copy()
        rows = []
        for t in times:
            sys.evolve(t)
            c = sys.clusters()
            for cid, m, x, v in zip(c["first"], c["m"], c["x"], c["v"]):
                rows.append((float(t), int(cid), float(m), float(x), float(v)))
        return rows


def trajectory_csv(rows: Sequence[tuple]) -> str:
    out = io.StringIO()
    out.write("t,cluster_id,m,x,v\n")
    for t, cid, m, x, v in rows:
        out.write(f"{t!r},{cid},{m!r},{x!r},{v!r}\n")
    return out.getvalue()


def events_csv(events: Sequence[CollisionEvent]) -> str:
    out = io.StringIO()
    out.write("t,first_index,last_index,post_velocity\n")
    for e in events:
        out.write(f"{e.time!r},{e.first_index},{e.last_index},{e.post_velocity!r}\n")
    return out.getvalue()


def evolve(sys: ParticleSystem, t_target: float) -> ParticleSystem:
    """Copying form of :meth:`ParticleSystem.evolve`."""
    return sys.copy().evolve(t_target)


def merge(sys: ParticleSystem, pairs) -> ParticleSystem:
    """Copying form of :meth:`ParticleSystem.merge`."""
    return sys.copy().merge(pairs)


def next_collision(sys: ParticleSystem):
    return sys.next_collision()


def state_of(sys: ParticleSystem) -> MassVelocityState:
    return sys.state_of()
