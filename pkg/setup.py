#!/usr/bin/env python3
"""Build script for the optional compiled kernel.

The package works without the extension; a failed compile only costs speed.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("GINIBRE_SV_NO_EXT", "0") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("ginibre_sv._kernels", ["src/ginibre_sv/_kernels.pyx"],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
