import numpy as np
from setuptools import setup
from setuptools.extension import Extension
from Cython.Build import cythonize

ext = Extension(
    "adasise._kernels",
    ["src/adasise/_kernels.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3"],
)

setup(ext_modules=cythonize([ext], language_level="3"))
