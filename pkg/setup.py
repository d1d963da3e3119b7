import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("LATENTPANEL_PURE") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "latentpanel._fastdist",
                    ["src/latentpanel/_fastdist.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython/NumPy at build time: ship pure-Python, the package
        # falls back to its NumPy distance path at import.
        ext_modules = []

setup(ext_modules=ext_modules)
