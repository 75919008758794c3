"""Build the optional Cython kernels; the package imports a pure-Python
fallback when the extension is missing."""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ADHESION1D_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "adhesion1d._kernels._ckernels",
                ["src/adhesion1d/_kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3", "boundscheck": False,
                                 "wraparound": False, "cdivision": True},
        )

setup(ext_modules=ext_modules)
