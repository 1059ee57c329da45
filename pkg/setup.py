"""Build script for the optional compiled simulation kernel.

The package is pure Python except for one hot loop, the switched-state
recursion in ``raccess._kernels``.  When Cython is available the loop is
compiled; otherwise the install falls back to the NumPy reference
implementation selected at import time.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/raccess/_kernels/_speedups.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
