"""JIT switch.

Kernels in :mod:`radioforge.kernels` come in two flavours: a numba-compiled
loop and a vectorised numpy equivalent. ``RADIOFORGE_NUMBA=0`` in the
environment (read once, at import) selects the numpy path everywhere.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("RADIOFORGE_NUMBA", "1") not in ("0", "false", "no")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
