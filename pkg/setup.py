"""Build script: compiles the optional native insertion kernel.

The package works without the extension (a pure-Python kernel is selected at
import time), so a failed compile only costs speed. Set ODTSIM_SKIP_NATIVE=1
to skip the extension entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ODTSIM_SKIP_NATIVE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "odtsim.kernels._native",
                    ["src/odtsim/kernels/_native.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
