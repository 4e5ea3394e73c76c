import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "maskalign.kernels._fast",
        sources=["src/maskalign/kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

# The compiled kernel is optional: without Cython the package installs with
# the pure NumPy fallback only.
setup(ext_modules=cythonize(extensions, language_level=3) if cythonize else [])
