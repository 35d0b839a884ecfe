"""Build script: compiles the optional accelerated kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any failure to build or import the compiled
module is non-fatal.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that downgrades compilation failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        import warnings

        warnings.warn(
            "could not build the accelerated kernels (%s); "
            "the pure-python backend will be used" % (exc,)
        )


def _extensions():
    if os.environ.get("WTCS_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - cython is a build requirement
        return []
    ext = Extension(
        "wtcs._kernels",
        sources=["src/wtcs/_kernels.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
