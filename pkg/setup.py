"""Build script: compiles the optional Horner kernel extension.

The package works without the extension (contactfb.kernels falls back to a
vectorized numpy path), so a failed compile only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("contactfb._speedups", ["src/contactfb/_speedups.pyx"])],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
