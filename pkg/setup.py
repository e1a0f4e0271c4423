import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CLTREE_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "cltree._kernels",
                    ["src/cltree/_kernels.pyx"],
                    # no contraction: keeps results bit-identical to the Python twin
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
