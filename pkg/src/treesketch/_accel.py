"""
Numba switch shared by the hot kernels.

Set ``TREESKETCH_DISABLE_NUMBA=1`` before import to force the pure-numpy
paths. Every kernel module keeps both implementations and picks one through
:func:`use_numba`, so the two can be compared inside one process.
"""
import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_OFF = ("1", "true", "yes", "on")

ENABLE_NUMBA = HAS_NUMBA and os.environ.get("TREESKETCH_DISABLE_NUMBA", "").lower() not in _OFF


def njit(*args, **kwargs):
    """``numba.njit`` with caching; identity decorator when numba is missing."""
    kwargs.setdefault("cache", True)
    if not HAS_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def use_numba(flag=None):
    """Resolve a per-call override against the module default."""
    if flag is None:
        return ENABLE_NUMBA
    return bool(flag) and HAS_NUMBA
