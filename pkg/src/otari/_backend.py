"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting the
environment variable ``OTARI_DISABLE_NUMBA=1`` forces the pure-numpy path;
``OTARI_THREADS`` caps worker parallelism (numba's thread pool and the
experiment runner's trial pool).
"""

import os

DISABLE_ENV = "OTARI_DISABLE_NUMBA"
THREADS_ENV = "OTARI_THREADS"

NUMBA_OPTS = {"cache": True}

try:
    if os.environ.get(DISABLE_ENV, "0") == "1":
        raise ImportError("numba disabled by environment flag")
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def thread_cap():
    """Parsed OTARI_THREADS value, or None when unset/invalid."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return max(1, n)


if HAS_NUMBA:
    _cap = thread_cap()
    if _cap is not None:
        numba.set_num_threads(min(_cap, numba.config.NUMBA_NUM_THREADS))


def njit(func):
    """Compile func when numba is active; return it unchanged otherwise."""
    if HAS_NUMBA:
        return numba.njit(func, **NUMBA_OPTS)
    return func
