"""Build script for the optional compiled LSTM kernels.

The package works without the extension (a pure numpy implementation is
selected at import time), so a failed extension build only costs speed.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the speedup extension if possible, otherwise skip it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: compiled LSTM kernels not built ({exc!r}); "
            "falling back to the pure numpy backend",
            file=sys.stderr,
        )


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"WARNING: {exc}; building without compiled kernels", file=sys.stderr)
        return []
    ext = Extension(
        "maneuver_rec.nn._kernels_cy",
        ["src/maneuver_rec/nn/_kernels_cy.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
