"""Hot kernels: pool-adjacent-violators, lower hull, sticky-particle event loop.

The compiled extension ``_ckernels`` is used when importable; otherwise the
pure-Python module ``_pykernels`` is selected. Set ``ADHESION1D_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _pykernels

try:
    if os.environ.get("ADHESION1D_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as _active
    BACKEND = "cython"
except ImportError:
    _active = _pykernels
    BACKEND = "python"


def available_backends():
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get_backend(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); the active one
    when ``name`` is None."""
    if name is None:
        return _active
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


pava = _active.pava
lower_hull = _active.lower_hull
sps_evolve = _active.sps_evolve

__all__ = ["BACKEND", "available_backends", "get_backend", "pava",
           "lower_hull", "sps_evolve"]
