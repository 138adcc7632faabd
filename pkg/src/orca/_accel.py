"""Selection between numba-compiled kernels and the pure-numpy fallback.

Set ``ORCA_DISABLE_NUMBA=1`` before import to force the numpy path. The
fallback is also used when numba cannot be imported.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("ORCA_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

NUMBA_AVAILABLE = _nb is not None
USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` with cache on and fastmath off; identity without numba.

    The decorated function is always compiled lazily, so importing a kernel
    module never triggers compilation.
    """
    if _nb is None:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    kwargs.setdefault("fastmath", False)
    return _nb.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
