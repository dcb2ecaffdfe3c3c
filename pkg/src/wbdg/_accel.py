"""Numba switch.

Set ``WBDG_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Numba is also
skipped silently when it cannot be imported.
"""

import os

_FLAG = os.environ.get("WBDG_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in {"1", "true", "yes", "on"}

numba = None
if not DISABLED_BY_ENV:
    try:
        import numba  # noqa: F811
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba = None

NUMBA_ENABLED = numba is not None


def jit(fn):
    """``numba.njit`` when enabled, identity otherwise."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
