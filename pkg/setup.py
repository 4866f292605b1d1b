"""Build script: compiles the optional native kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile downgrades to a pure-Python install
instead of aborting.
"""

import sys

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


def native_extensions():
    if cythonize is None:
        return []
    ext = Extension(
        "privstream.kernels._native",
        ["src/privstream/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


try:
    setup(ext_modules=native_extensions())
except SystemExit:
    print("native kernel build failed; installing pure-Python fallback", file=sys.stderr)
    setup(ext_modules=[])
