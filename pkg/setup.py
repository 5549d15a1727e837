import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("ROBOMARL_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "robomarl._core",
                ["src/robomarl/_core.pyx"],
                # no FMA contraction, fast-math or sin/cos->sincos fusion: results must match
                # the Python fallback bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math",
                                    "-fno-builtin-sin", "-fno-builtin-cos"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
