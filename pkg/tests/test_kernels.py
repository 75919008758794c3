import subprocess
import sys

import numpy as np
import pytest

from adhesion1d import _kernels
from adhesion1d.bench import all_merging_state, random_cells, time_proj_k
from adhesion1d.scenario import make_rng

BACKENDS = [_kernels.get_backend(b) for b in _kernels.available_backends()]


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_pava_small_cases(k):
    ends, means = k.pava(np.array([1.0, 1.0, 1.0]), np.array([3.0, 1.0, 2.0]))
    # merges only on strict violation; equal pooled means are left to canonicalization
    assert ends.tolist() == [2, 3] and means.tolist() == [2.0, 2.0]
    ends, means = k.pava(np.array([1.0]), np.array([5.0]))
    assert ends.tolist() == [1] and means.tolist() == [5.0]
    ends, means = k.pava(np.array([0.5, 0.5]), np.array([0.0, 1.0]))
    assert ends.tolist() == [1, 2] and means.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_lower_hull_small_cases(k):
    x = np.array([0.0, 0.5, 1.0])
    assert k.lower_hull(x, np.array([0.0, 0.5, 0.0])).tolist() == [0, 2]
    assert k.lower_hull(x, np.array([0.0, -0.5, 0.0])).tolist() == [0, 1, 2]
    # collinear middle point is dropped
    assert k.lower_hull(x, np.array([0.0, 0.5, 1.0])).tolist() == [0, 2]


def test_backends_agree_on_random_input():
    if len(BACKENDS) < 2:
        pytest.skip("extension not built")
    rng = make_rng(11)
    a, b = BACKENDS
    for n in (2, 17, 1000, 50000):
        w = rng.uniform(0.1, 1.0, n)
        v = rng.standard_normal(n)
        ea, ma = a.pava(w, v)
        eb, mb = b.pava(w, v)
        np.testing.assert_array_equal(ea, eb)
        np.testing.assert_allclose(ma, mb, rtol=0, atol=1e-13)
        x = np.cumsum(w)
        np.testing.assert_array_equal(a.lower_hull(x, v), b.lower_hull(x, v))


def test_read_only_inputs_accepted():
    w = np.ones(4)
    v = np.array([1.0, 0.0, 2.0, 3.0])
    w.setflags(write=False)
    v.setflags(write=False)
    for k in BACKENDS:
        k.pava(w, v)
        k.lower_hull(np.cumsum(w), v)


def test_pure_python_switch():
    code = "from adhesion1d import _kernels; print(_kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"ADHESION1D_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


def test_bench_inputs_are_deterministic():
    a = random_cells(make_rng(5), 100)
    b = random_cells(make_rng(5), 100)
    assert a == b
    s1, s2 = all_merging_state(make_rng(5), 50), all_merging_state(make_rng(5), 50)
    np.testing.assert_array_equal(s1.velocities, s2.velocities)


def test_proj_k_scales_linearly():
    small = min(time_proj_k(10 ** 4, 1) for _ in range(5))
    large = min(time_proj_k(10 ** 6, 1) for _ in range(2))
    # 100x the cells; allow generous slack for timer noise
    assert large / small < 400
