"""Timing of the two hot paths: projection onto K and a fully merging
particle system."""

from __future__ import annotations

import io
import time

import numpy as np

from . import _kernels
from .cone import proj_k
from .particles import ParticleSystem
from .measures import MassVelocityState
from .scenario import make_rng
from .stepfn import Partition, StepFn


def random_cells(rng: np.random.Generator, n: int) -> StepFn:
    """``n`` cells of random width with standard normal values."""
    w = rng.uniform(0.5, 1.5, n)
    b = np.concatenate(([0.0], np.cumsum(w)))
    b /= b[-1]
    b[-1] = 1.0
    return StepFn(Partition(b), rng.standard_normal(n), canonical=False)


def all_merging_state(rng: np.random.Generator, n: int) -> MassVelocityState:
    """Sorted random positions with velocities sorted in decreasing order:
    every adjacent pair approaches, so everything ends in one cluster."""
    x = np.sort(rng.uniform(0.0, 1.0, n))
    v = np.sort(rng.uniform(-1.0, 1.0, n))[::-1]
    return MassVelocityState(np.full(n, 1.0 / n), x, v)


def time_proj_k(n: int, seed: int = 0, backend: str | None = None) -> float:
    f = random_cells(make_rng(seed), n)
    t0 = time.perf_counter()
    proj_k(f, backend=backend)
    return time.perf_counter() - t0


def time_evolve(n: int, seed: int = 0, backend: str | None = None) -> tuple[float, int]:
    """Seconds for a full run to completion and the final cluster count."""
    state = all_merging_state(make_rng(seed), n)
    sys = ParticleSystem(state, backend=backend)
    t0 = time.perf_counter()
    sys.run_to_completion()
    return time.perf_counter() - t0, sys.n_clusters


def run_bench(ns, seed: int = 0, backends=None, python_max: int = 10 ** 5) -> list[dict]:
    """Rows ``backend, op, n, seconds, clusters``. The pure-Python backend is
    skipped above ``python_max`` points."""
    backends = backends or _kernels.available_backends()
    rows = []
    for backend in backends:
        for n in ns:
            if backend == "python" and n > python_max:
                continue
            rows.append({"backend": backend, "op": "proj_k", "n": n,
                         "seconds": time_proj_k(n, seed, backend), "clusters": ""})
            sec, nc = time_evolve(n, seed, backend)
            rows.append({"backend": backend, "op": "evolve", "n": n,
                         "seconds": sec, "clusters": nc})
    return rows


def bench_csv(rows) -> str:
    out = io.StringIO()
    out.write("backend,op,n,seconds,clusters\n")
    for r in rows:
        out.write(f"{r['backend']},{r['op']},{r['n']},{r['seconds']:.6f},{r['clusters']}\n")
    return out.getvalue()
