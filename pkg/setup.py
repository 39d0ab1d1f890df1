"""Build script.

The electrical inner loop ships as a Cython extension (rowsim._kernel).
If Cython or a C compiler is unavailable the build still succeeds and the
package falls back to the pure-Python kernel (rowsim._kernel_py) at import.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("ROWSIM_PURE_PYTHON") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "rowsim._kernel",
                    ["src/rowsim/_kernel.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
