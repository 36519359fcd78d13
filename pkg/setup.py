"""Build script: compiles the optional accelerator extension when Cython and a
C compiler are available, and falls back to a pure-Python install otherwise."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "icgt._kernels._accel",
                ["src/icgt/_kernels/_accel.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"icgt: skipping compiled kernels ({exc!r}); numpy fallback will be used")

setup(ext_modules=ext_modules)
