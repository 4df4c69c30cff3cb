import os

from setuptools import Extension, setup

# The compiled NMS kernel is optional: the package falls back to a pure
# numpy implementation when the extension is unavailable. Set
# HEATPRED_SKIP_EXT=1 to force a pure-Python install.
ext_modules = []
if os.environ.get("HEATPRED_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "heatpred._nms_cy",
                    ["src/heatpred/_nms_cy.pyx"],
                    # -ffp-contract=off keeps scalar arithmetic bit-identical
                    # to the numpy fallback (no FMA contraction).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
