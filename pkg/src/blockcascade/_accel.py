"""Backend selection for the hot kernels.

Numba is used when it is importable and ``BLOCKCASCADE_NO_NUMBA`` is not
set to a truthy value. Otherwise every kernel runs its pure-numpy twin.
"""
import os

_FLAG = os.environ.get("BLOCKCASCADE_NO_NUMBA", "").strip().lower()

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity decorator otherwise.

    Kernels are always compiled when numba is present so that both backends
    stay testable in one process; ``USE_NUMBA`` only decides dispatch.
    """
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
