from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension(
            "yukstripe._anneal_cy",
            ["src/yukstripe/_anneal_cy.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
        )],
        language_level=3,
    )
except ImportError:
    # no Cython available: install with the pure-numpy annealing kernel
    pass

setup(ext_modules=ext_modules)
