"""Build script: compiles the optional Cython trip kernel.

The compiled kernel links against numpy's random distribution library so it
draws from the exact same C routines as ``numpy.random.Generator``.  If the
extension cannot be built the package still installs and falls back to the
pure-numpy kernel at import time.
"""

import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


def _numpy_random_lib_dir():
    import numpy.random

    return os.path.join(os.path.dirname(numpy.random.__file__), "lib")


class optional_build_ext(build_ext):
    """Build the accelerator if possible; never fail the install over it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or linker missing
            warnings.warn(f"skipping compiled kernel ({exc}); using python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping {ext.name} ({exc}); using python backend")


def make_extensions():
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "valuesim._backend._speedups",
        ["src/valuesim/_backend/_speedups.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[_numpy_random_lib_dir()],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=make_extensions(), cmdclass={"build_ext": optional_build_ext})
