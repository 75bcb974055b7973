"""Build hook for the optional compiled stream-execution core.

The package is pure Python; the Cython extension only accelerates the
streaming simulator. If Cython or a C compiler is unavailable the install
still succeeds and the pure-Python engine is used at runtime.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "convforge.simulate._engine",
                ["src/convforge/simulate/_engine.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
