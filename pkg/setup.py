"""Build the compiled Monte Carlo core.

The extension is optional: if Cython or a working C toolchain is missing
the package installs anyway and falls back to the pure-NumPy kernels at
import time (at a large speed penalty for desk-scale runs).
"""

import sys
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing entirely
            print(f"warning: skipping compiled kernel build: {exc}", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(
                f"warning: compiled kernel {ext.name} failed to build ({exc}); "
                "the pure-NumPy backend will be used",
                file=sys.stderr,
            )


def make_ext_modules():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"warning: {exc}; building without compiled kernel", file=sys.stderr)
        return []
    ext = Extension(
        "valor._kernel",
        ["src/valor/_kernel.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=[
            "-O3",
            "-march=native",
            "-ffast-math",
            "-fopenmp",
            "-std=c11",
        ],
        extra_link_args=["-fopenmp", "-lmvec", "-lm"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=make_ext_modules(), cmdclass={"build_ext": OptionalBuildExt})
