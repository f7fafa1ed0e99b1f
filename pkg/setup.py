"""Build the optional compiled core.

When Cython or a C compiler is missing the package still installs and uses
its numpy fallback.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("interptrace._core", ["src/interptrace/_core.pyx"],
                   include_dirs=[numpy.get_include()],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
