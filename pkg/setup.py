"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the extension only accelerates the LSTM gate,
softmax and optimizer inner loops.  Set NAVSPEAKER_PURE=1 to skip building it.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Never fail the install because the extension would not compile."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"navspeaker: skipping compiled kernels ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"navspeaker: skipping {ext.name} ({exc})")


ext_modules = []
if not os.environ.get("NAVSPEAKER_PURE"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "navspeaker.nn._kernels",
                    ["src/navspeaker/nn/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError as exc:
        print(f"navspeaker: Cython/numpy unavailable, pure-python build ({exc})")

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
