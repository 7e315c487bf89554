"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so any build failure here downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Let the install proceed when the extension cannot be compiled."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or toolchain missing
            print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); "
                  "the pure NumPy backend will be used", file=sys.stderr)


def extension_modules():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"warning: Cython/NumPy unavailable ({exc}); "
              "building without compiled kernels", file=sys.stderr)
        return []
    ext = Extension(
        "embkit._core._ckernels",
        ["src/embkit/_core/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(
    ext_modules=extension_modules(),
    cmdclass={"build_ext": OptionalBuildExt},
)
