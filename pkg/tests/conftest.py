import numpy as np
import pytest
from hypothesis import strategies as st

from adhesion1d.scenario import make_rng
from adhesion1d.stepfn import StepFn

# fixed a priori for every randomized population in the test suite
SEED = 20261016


@pytest.fixture
def rng():
    return make_rng(SEED)


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def step_fns(draw, max_cells=12, values=finite):
    n = draw(st.integers(1, max_cells))
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    b = np.concatenate(([0.0], np.cumsum(w)))
    b = b / b[-1]
    b[-1] = 1.0
    b = np.unique(b)
    vals = draw(st.lists(values, min_size=len(b) - 1, max_size=len(b) - 1))
    return StepFn(b, vals)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def record_criterion(request):
    """Record and print one pass/fail line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
