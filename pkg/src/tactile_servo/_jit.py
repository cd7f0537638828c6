"""Numba toggle.

Kernels are written once in plain Python over numpy arrays. When numba is
importable and ``TACTILE_SERVO_NO_JIT`` is unset (or ``0``), they are compiled
with ``@njit``; otherwise the same source runs in the interpreter.
"""
import os
import warnings

_flag = os.environ.get("TACTILE_SERVO_NO_JIT", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    # an outdated system TBB only disables that threading layer; numba falls back on its own
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def python_impl(fn):
    """Return the interpreted version of a kernel (identity when JIT is off)."""
    return getattr(fn, "py_func", fn)
