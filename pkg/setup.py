"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy fallback is
selected at import time), so a failed compile only costs speed.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "choreo._ckernels",
                ["src/choreo/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"choreo: skipping Cython extension build ({exc}); "
          "pure-python kernels will be used")

setup(ext_modules=ext_modules)
