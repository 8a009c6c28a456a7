"""Build the optional compiled kernels; the package works without them."""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("SUBWAVE1D_NO_EXTENSION"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "subwave1d._kernels",
        ["src/subwave1d/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
