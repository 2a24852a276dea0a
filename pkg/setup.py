"""Build script for the optional compiled range-coder core.

The package works without the extension (a pure-Python backend is selected
at import time); building it just makes entropy coding much faster.
Build in place with:  python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gs4dc.rangecoder._core",
                ["src/gs4dc/rangecoder/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
