"""Build script: compiles the Cython kernel core when a toolchain is available.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed extension build is downgraded to a warning.
"""

import warnings

from setuptools import setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"skipping compiled kernels: {exc}")
        return []
    ext = Extension(
        "spanweak._core",
        sources=["src/spanweak/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
