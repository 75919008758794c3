"""Scenario documents, analytic families and seeded random initial data.

A scenario is a strict JSON document::

    {"version": 1, "id": "head_on", "initial": {"atoms": [[0.5, 0, 1], [0.5, 1, -1]]},
     "times": [0, 0.25, 0.5, 1], "suites": ["equivalence"], "tolerances": {}, "seed": 7}

``initial`` holds exactly one of ``atoms`` (rows ``[m, x, v]``), ``csv`` (a
path relative to the scenario file) or ``family`` (with ``N`` and optional
``params``). Unknown keys are rejected at every level.

Random data comes from numpy's Philox4x64-10 counter-based generator seeded
with the scenario's 64-bit seed.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measures import MassVelocityState, discretize

SCENARIO_VERSION = 1
SUITES = ("cone", "stability", "equivalence", "entropy", "gradflow")
TOLERANCE_KEYS = {
    "equivalence": 1e-9,
    "residual": 1e-9,
    "stability": 1e-9,
    "contraction": 1e-10,
    "conservation": 1e-12,
    "oleinik": 1e-9,
    "hopf": 1e-9,
    "evi": 1e-6,
    "event_window": 1e-3,
}
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")
_TOP_KEYS = {"version", "id", "initial", "times", "suites", "tolerances", "seed"}
_INITIAL_KEYS = {"atoms", "csv", "family", "N", "params"}


class ScenarioError(ValueError):
    """Invalid scenario or initial data (CLI exit code 2)."""


def make_rng(seed: int) -> np.random.Generator:
    """Philox4x64-10 stream for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & (2 ** 64 - 1)))


def random_state(rng: np.random.Generator, n_max: int = 50, n_min: int = 2,
                 x_range=(0.0, 1.0), v_range=(-1.0, 1.0)) -> MassVelocityState:
    """``N`` uniform in ``[n_min, n_max]``; masses uniform then normalized;
    positions and velocities uniform on the given ranges."""
    n = int(rng.integers(n_min, n_max + 1))
    m = rng.uniform(0.0, 1.0, n)
    while np.any(m <= 0):
        m = rng.uniform(0.0, 1.0, n)
    m = m / m.sum()
    x = rng.uniform(*x_range, n)
    v = rng.uniform(*v_range, n)
    return MassVelocityState(m, x, v)


def random_monotone_velocity_state(rng: np.random.Generator, n_max: int = 10,
                                   n_min: int = 2) -> MassVelocityState:
    """Random data whose velocities are nondecreasing in position: no
    collision ever happens."""
    s = random_state(rng, n_max, n_min)
    return MassVelocityState(s.masses, s.positions, np.sort(s.velocities))


# -- analytic families ---------------------------------------------------------------

def _uniform_q(w):
    return np.asarray(w, dtype=np.float64)


FAMILIES = {
    # name: (quantile, velocity of x, parameter defaults)
    "rest": (_uniform_q, lambda x, p: np.zeros_like(x), {}),
    "head_on": (_uniform_q, lambda x, p: np.where(x < 0.5, p["speed"], -p["speed"]),
                {"speed": 1.0}),
    "compression": (_uniform_q, lambda x, p: p["speed"] * (0.5 - x), {"speed": 2.0}),
    "expansion": (_uniform_q, lambda x, p: p["speed"] * (x - 0.5), {"speed": 1.0}),
    "sine": (_uniform_q, lambda x, p: -p["amplitude"] * np.sin(2 * np.pi * x),
             {"amplitude": 1.0}),
    "translation": (_uniform_q, lambda x, p: np.full_like(x, p["speed"]), {"speed": 1.0}),
}


def family_state(name: str, N: int, params: dict | None = None,
                 seed: int | None = None) -> MassVelocityState:
    """Initial data of a named family: ``N`` midpoint-quantile atoms of the
    uniform law on [0, 1] with the family's velocity, or ``random`` data."""
    params = dict(params or {})
    if name == "random":
        allowed = {"n_min"}
        extra = set(params) - allowed
        if extra:
            raise ScenarioError(f"unknown parameters for family 'random': {sorted(extra)}")
        return random_state(make_rng(0 if seed is None else seed), n_max=N,
                            n_min=int(params.get("n_min", N)))
    if name not in FAMILIES:
        raise ScenarioError(f"unknown family {name!r}; known: {sorted(FAMILIES) + ['random']}")
    q, vel, defaults = FAMILIES[name]
    extra = set(params) - set(defaults)
    if extra:
        raise ScenarioError(f"unknown parameters for family {name!r}: {sorted(extra)}")
    p = {**defaults, **params}
    return discretize(q, N, velocity=lambda x: vel(x, p))


# -- scenario documents -------------------------------------------------------------

@dataclass
class Scenario:
    id: str
    initial: dict
    times: list = field(default_factory=list)
    suites: list = field(default_factory=lambda: list(SUITES))
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    version: int = SCENARIO_VERSION
    base_dir: Path | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not _ID_RE.match(self.id):
            raise ScenarioError(f"scenario id {self.id!r} is empty or not filesystem-safe")
        if self.version != SCENARIO_VERSION:
            raise ScenarioError(f"unsupported scenario version {self.version!r}")
        if not isinstance(self.times, list):
            raise ScenarioError("times must be a list")
        try:
            t = [float(x) for x in self.times]
        except (TypeError, ValueError):
            raise ScenarioError("times must be numbers") from None
        if any(not math.isfinite(x) or x < 0 for x in t) or any(b < a for a, b in zip(t, t[1:])):
            raise ScenarioError("times must be finite, nonnegative and nondecreasing")
        self.times = t
        bad = [s for s in self.suites if s not in SUITES]
        if bad:
            raise ScenarioError(f"unknown suites {bad}; known: {list(SUITES)}")
        bad = sorted(set(self.tolerances) - set(TOLERANCE_KEYS))
        if bad:
            raise ScenarioError(f"unknown tolerance keys {bad}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ScenarioError("seed must be an integer")
        _check_initial(self.initial)

    def tol(self, key: str, override: float | None = None) -> float:
        if override is not None:
            return float(override)
        return float(self.tolerances.get(key, TOLERANCE_KEYS[key]))

    def to_dict(self) -> dict:
        return {"version": self.version, "id": self.id, "initial": self.initial,
                "times": self.times, "suites": self.suites,
                "tolerances": self.tolerances, "seed": self.seed}

    def config_hash(self, extra: dict | None = None) -> str:
        doc = {"scenario": self.to_dict(), "options": extra or {}}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def state(self, renormalize: bool = False) -> MassVelocityState:
        ini = self.initial
        try:
            if "atoms" in ini:
                a = np.asarray(ini["atoms"], dtype=np.float64).reshape(-1, 3)
                m = a[:, 0]
                if renormalize and np.all(m > 0):
                    m = m / m.sum()
                elif abs(float(m.sum()) - 1.0) > 1e-9:
                    raise ScenarioError(f"masses sum to {float(m.sum())!r}, expected 1")
                return MassVelocityState(m / m.sum(), a[:, 1], a[:, 2])
            if "csv" in ini:
                p = Path(ini["csv"])
                if not p.is_absolute() and self.base_dir is not None:
                    p = self.base_dir / p
                return MassVelocityState.from_csv(p, renormalize=renormalize)
            return family_state(ini["family"], int(ini["N"]), ini.get("params"), self.seed)
        except ScenarioError:
            raise
        except (OSError, ValueError, TypeError) as exc:
            raise ScenarioError(f"initial data for {self.id!r}: {exc}") from None


def _check_initial(ini):
    if not isinstance(ini, dict):
        raise ScenarioError("initial must be an object")
    extra = sorted(set(ini) - _INITIAL_KEYS)
    if extra:
        raise ScenarioError(f"unknown keys in initial: {extra}")
    kinds = [k for k in ("atoms", "csv", "family") if k in ini]
    if len(kinds) != 1:
        raise ScenarioError("initial needs exactly one of atoms, csv, family")
    if kinds[0] == "family":
        if "N" not in ini or not isinstance(ini["N"], int) or ini["N"] < 1:
            raise ScenarioError("family initial data needs an integer N >= 1")
        if "params" in ini and not isinstance(ini["params"], dict):
            raise ScenarioError("params must be an object")
    elif "N" in ini or "params" in ini:
        raise ScenarioError("N and params are only valid with family")


def parse_scenario(doc: dict, base_dir: Path | None = None) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    extra = sorted(set(doc) - _TOP_KEYS)
    if extra:
        raise ScenarioError(f"unknown scenario keys: {extra}")
    for key in ("version", "id", "initial"):
        if key not in doc:
            raise ScenarioError(f"scenario is missing {key!r}")
    return Scenario(
        id=doc["id"], initial=doc["initial"], times=doc.get("times", []),
        suites=list(doc.get("suites", SUITES)), tolerances=dict(doc.get("tolerances", {})),
        seed=doc.get("seed", 0), version=doc["version"], base_dir=base_dir)


def _reject_constant(name):
    raise ScenarioError(f"non-standard JSON constant {name}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {str(path)!r}: {exc}") from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {str(path)!r}: {exc}") from None
    return parse_scenario(doc, base_dir=path.parent)


@dataclass(frozen=True)
class ReportRecord:
    """Outcome of one check; passes iff ``measured <= threshold``."""

    scenario_id: str
    check: str
    measured: float
    threshold: float
    runtime: float = 0.0

    @property
    def status(self) -> str:
        # NaN compares false, so corrupted data fails
        return "pass" if self.measured <= self.threshold else "fail"

    def as_dict(self) -> dict:
        return {"scenario_id": self.scenario_id, "check": self.check,
                "status": self.status, "measured": self.measured,
                "threshold": self.threshold, "runtime": self.runtime}
