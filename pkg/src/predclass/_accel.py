"""Backend selection for the hot kernels.

Set ``PREDCLASS_DISABLE_NUMBA=1`` to force the pure-numpy path. The flag is
read once at import time.
"""

import os

_DISABLED = os.environ.get("PREDCLASS_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise identity."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def identity(fn):
        return fn

    return identity
