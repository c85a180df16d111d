"""Build script: compiles the simulation kernel to a C extension when possible.

The kernel at src/uavfleet/engine/_kernel.py is written in Cython "pure
Python" mode, so the same source runs interpreted if compilation is
unavailable. Set UAVFLEET_NO_EXT=1 to skip the extension build entirely.
"""

import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Degrade to the pure-Python kernel if the C toolchain is broken."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"kernel extension build failed, using pure-Python fallback: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"kernel extension build failed, using pure-Python fallback: {exc}")


def ext_modules():
    if os.environ.get("UAVFLEET_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available, installing with pure-Python kernel only")
        return []
    return cythonize(
        [Extension("uavfleet.engine._kernel", ["src/uavfleet/engine/_kernel.py"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )


setup(ext_modules=ext_modules(), cmdclass={"build_ext": optional_build_ext})
