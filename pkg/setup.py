"""Build script for the optional compiled right-hand-side kernel.

The package works without the extension (a NumPy fallback kernel is
selected at import time); set DEASIM_NO_EXT=1 to skip the build when
Cython or a C compiler is unavailable.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DEASIM_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("deasim._rhs_cy", ["src/deasim/_rhs_cy.pyx"])],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
