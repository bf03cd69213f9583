"""Build script: compiles the optional geo kernel extension.

The extension is a performance add-on; the package falls back to the pure
Python kernels at import time if the compiled module is absent, so a failed
compile must not fail the install.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "lampgrid._geokernels",
        sources=["src/lampgrid/_geokernels.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


class optional_build_ext(build_ext):
    """build_ext that degrades to the pure Python fallback on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"lampgrid: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(
                f"lampgrid: could not build {ext.name}, using pure Python "
                f"kernels ({exc})",
                file=sys.stderr,
            )


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
