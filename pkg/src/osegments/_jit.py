"""Optional numba acceleration.

Set ``OSEGMENTS_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. Results are identical either way; only speed differs.
"""
import os

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("OSEGMENTS_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def optional_njit(*args, **kwargs):
    def decorator(func):
        if USE_NUMBA:
            return _njit(*args, **kwargs)(func)
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        func = args[0]
        args = ()
        return decorator(func)
    return decorator
