"""Build script: compiles the optional allocation speedups extension.

The package works without it; cscshare.kernels falls back to the pure
Python implementation when the extension is absent or fails to build.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise continue without it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            self._skip(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._skip(exc)

    def _skip(self, exc):
        print(
            f"WARNING: building cscshare._speedups failed ({exc!r}); "
            "falling back to the pure Python kernels",
            file=sys.stderr,
        )


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/cscshare/kernels/_speedups.pyx"],
        language_level=3,
    )
except ImportError:
    print(
        "WARNING: Cython not available; installing without compiled kernels",
        file=sys.stderr,
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
