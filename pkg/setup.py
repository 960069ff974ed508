import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the package falls back at import
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("CROWDROUTE_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "crowdroute._kernel",
                ["src/crowdroute/_kernel.pyx"],
                # contraction off keeps results bit-identical to the Python kernel
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
