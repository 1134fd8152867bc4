from setuptools import Extension, setup

# The compiled kernel is optional: the package falls back to the pure-Python
# integrator when the extension is unavailable (see stabindex.backend).
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("stabindex._kernel", ["src/stabindex/_kernel.pyx"])],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
