import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "unitary_synth._kernels",
        ["src/unitary_synth/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # plain complex multiply without the C99 NaN-recovery call; results stay deterministic
        extra_compile_args=["-O3", "-fcx-fortran-rules"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
