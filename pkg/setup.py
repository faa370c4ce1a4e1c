from setuptools import setup
from setuptools.extension import Extension

# -ffp-contract=off: the compiled tree kernels must be bit-identical to the
# pure-Python fallback, so FMA contraction has to stay disabled.
extensions = [
    Extension(
        "superhedge._tree_cy",
        ["src/superhedge/_tree_cy.pyx"],
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
]

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    # No Cython: install the pure-Python package; backend.py falls back.
    ext_modules = []

setup(ext_modules=ext_modules)
