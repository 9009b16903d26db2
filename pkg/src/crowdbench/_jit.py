"""JIT switch for the numeric kernels.

Kernels are written in the numba-compatible subset of Python/NumPy. Setting
``CROWDBENCH_DISABLE_NUMBA=1`` (or running without numba installed) leaves
them as plain interpreted functions, which is the reference fallback path.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

DISABLED = os.environ.get("CROWDBENCH_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = numba is not None and not DISABLED


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(**kwargs)(f)
        return f

    if func is None:
        return wrap
    return wrap(func)


def py_func(f):
    """The interpreted version of a kernel, whichever mode is active."""
    return getattr(f, "py_func", f)
