"""Build script for the optional compiled search kernel.

The package is fully functional without the extension (a pure-Python
twin is selected at import time); compilation is attempted but allowed
to fail so that installs on exotic toolchains still succeed.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the kernel if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: compiled kernel skipped ({exc}); "
                  f"pure-Python backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  f"pure-Python backend will be used")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "conefpp._kernel",
        ["src/conefpp/_kernel.pyx"],
        language="c++",
        # -ffp-contract=off: the pure-Python backend must produce
        # bit-identical floats, so FMA contraction is disabled.
        extra_compile_args=["-O3", "-std=c++14", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
