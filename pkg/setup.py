"""Build script for the optional compiled codec kernels.

The package works without the extension; ``printcan.kernels`` falls back to
the pure-Python implementation when ``_ckernels`` cannot be imported.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: ship the pure-Python kernels only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "printcan._ckernels",
                ["src/printcan/_ckernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
