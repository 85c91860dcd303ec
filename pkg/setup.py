import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "spilab._kernels._ops",
                ["src/spilab/_kernels/_ops.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
else:
    # Pure-python fallback in spilab._kernels keeps the package functional
    # without a compiler; see spilab/_kernels/__init__.py.
    ext_modules = []

setup(ext_modules=ext_modules)
