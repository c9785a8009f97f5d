"""Build script: compiles the optional Cython kernel core.

The package works without the extension (numpy fallback is selected at
import time), so a failed compile downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup
from setuptools.errors import CCompilerError, ExecError, PlatformError


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "schrocurve._kernels._core",
        ["src/schrocurve/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-march=native"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


try:
    setup(ext_modules=_extensions())
except (CCompilerError, ExecError, PlatformError) as exc:
    sys.stderr.write(f"kernel extension build failed ({exc}); installing pure-python fallback\n")
    setup(ext_modules=[])
