"""Optional numba acceleration.

Set ``EPIBANDIT_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. Both paths consume the random stream in the same order, so they
produce identical results for identical generator states.
"""

from __future__ import annotations

import os

_FLAG = "EPIBANDIT_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(func):
    """Compile ``func`` with numba if available; return it unchanged otherwise."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)
