"""Build script for the optional compiled kernels.

The package works without them: ``tcpgds.kernels`` falls back to the numpy
implementation when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("TCPGDS_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "tcpgds._ckernels",
                    ["src/tcpgds/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
