"""Backend switch for the hot loops.

Set ``VECPLAP_NUMBA=0`` to run every kernel on its pure NumPy/Python path.
The flag is read once at import time.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("VECPLAP_NUMBA", "1").strip().lower() not in (
    "0", "false", "no", "off",
)


def jit(func):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def njit_always(func):
    """Compile regardless of the flag (lazily, on first call); used by benchmarks."""
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True)(func)
