"""Builds the optional compiled SAT kernel.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernel is used.
"""
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
except ImportError:
    pass
else:
    ext_modules = cythonize(
        ["src/guardflow/_sat_ext.pyx"],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )

setup(ext_modules=ext_modules)
