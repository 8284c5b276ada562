"""Build script.

The proof-of-work nonce scan has an optional C extension
(chipchain._powcore, SHA-256 via OpenSSL's libcrypto).  If Cython or a
C toolchain is missing the build falls through to the pure-Python
kernel in chipchain._pow; set CHIPCHAIN_NO_EXTENSION=1 to skip the
extension on purpose.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


def _extensions():
    if os.environ.get("CHIPCHAIN_NO_EXTENSION") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("chipchain: Cython not available, building without the native kernel",
              file=sys.stderr)
        return []
    ext = Extension(
        "chipchain._powcore",
        ["src/chipchain/_powcore.pyx"],
        libraries=["crypto"],
        extra_compile_args=["-O3", "-Wno-deprecated-declarations"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


class optional_build_ext(build_ext):
    """Treat extension build failures as a downgrade, not an error."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain or header problems
            print(f"chipchain: native kernel build failed ({exc}); "
                  "falling back to the pure-Python search", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"chipchain: building {ext.name} failed ({exc}); "
                  "falling back to the pure-Python search", file=sys.stderr)


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
