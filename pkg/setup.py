"""Build hook for the compiled rejection-sampling kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile is tolerated rather than fatal.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("rfpe_lab._kernels", ["src/rfpe_lab/_kernels.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
