"""Backend selection for the hot loops.

Kernels are written as plain Python over numpy arrays. With numba available
and ``DEGDIFF_BACKEND`` unset or ``numba`` the compiled versions are active;
``DEGDIFF_BACKEND=numpy`` selects the uncompiled / vectorized paths.
"""
import os
import warnings

BACKEND_ENV = "DEGDIFF_BACKEND"

_requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {_requested!r}")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    if _requested == "numba":
        warnings.warn("numba could not be imported, falling back to the numpy backend")

USE_NUMBA = HAVE_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit_both(func, **kwargs):
    """Return ``(compiled, python)`` versions of ``func``.

    ``compiled`` is ``func`` itself when numba is missing. Compilation is lazy,
    so selecting the numpy backend never pays for it.
    """
    compiled = _njit(**kwargs)(func) if HAVE_NUMBA else func
    return compiled, func
