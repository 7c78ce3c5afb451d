"""Builds the optional native kernel extension.

The package is fully functional without it (pure numpy fallback); the
extension accelerates the conv gather/scatter inner loops.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "spadesynth.kernels._native",
                ["src/spadesynth/kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    sys.stderr.write("Cython not available; building without native kernels\n")

setup(ext_modules=ext_modules)
