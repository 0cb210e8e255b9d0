"""Build script for the optional Cython kernels.

    pip install -e . --no-build-isolation

If Cython or a compiler is missing the package still installs and
``dfgnn.kernels`` falls back to the numpy implementation.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    pass
else:
    ext_modules = cythonize(
        [
            Extension(
                "dfgnn._kernels",
                ["src/dfgnn/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
