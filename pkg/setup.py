"""Build the optional Cython search kernel; the package works without it."""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("LLCPART_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        print("Cython/numpy unavailable; installing pure-Python kernels only", file=sys.stderr)
    else:
        ext_modules = cythonize(
            [Extension(
                "llcpart._search_ext",
                ["src/llcpart/_search_ext.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # leaf scores must match the Python path bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
