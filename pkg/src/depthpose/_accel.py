"""Optional numba acceleration.

Set ``DEPTHPOSE_NUMBA=0`` to run every kernel as plain Python/numpy.
The flag is read once, at import time.
"""

import os

_flag = os.environ.get("DEPTHPOSE_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional speedup
    numba = None

USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")


def njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn
