from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = [
        Extension(
            "lytnet.kernels._patches_cy",
            ["src/lytnet/kernels/_patches_cy.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
        )
    ]
    setup(ext_modules=cythonize(extensions, language_level="3"))
else:
    # pure-Python install; lytnet.kernels falls back to the numpy backend
    setup()
