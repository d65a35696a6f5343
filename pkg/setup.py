import os

from setuptools import Extension, setup

ext_modules = []
pyx = os.path.join("src", "spoofplan", "_kernels", "_fast.pyx")
if os.path.exists(pyx):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "spoofplan._kernels._fast",
                    [pyx],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython: the pure-Python kernel fallback is used at runtime.
        ext_modules = []

setup(ext_modules=ext_modules)
