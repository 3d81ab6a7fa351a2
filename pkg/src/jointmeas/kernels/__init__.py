"""Hot sampling kernels, compiled when available.

The Cython extension and the numpy fallback implement the same contract and
produce identical outcome masks for identical inputs; importing this package
selects whichever is available.
"""

try:
    from . import _gauss_cy as _impl

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build environment
    from . import _gauss_py as _impl

    HAVE_COMPILED = False

IMPLEMENTATION = "cython" if HAVE_COMPILED else "numpy"
sample_rotated_shots = _impl.sample_rotated_shots

__all__ = ["sample_rotated_shots", "HAVE_COMPILED", "IMPLEMENTATION"]
