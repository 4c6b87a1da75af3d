"""JIT switch for the hot kernels.

Kernels are written once as plain Python over numpy arrays. When numba is
importable and ``ANTRW_DISABLE_NUMBA`` is unset (or ``0``), they are compiled
with ``numba.njit``; otherwise the plain functions are used as-is. The
uncompiled source of a jitted kernel stays reachable as ``kernel.py_func``.
"""

import os

_disabled = os.environ.get("ANTRW_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False


def jit(func):
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    func.py_func = func
    return func


def python_impl(kernel):
    """Return the uncompiled implementation behind ``kernel``."""
    return kernel.py_func
