"""Kernel backend selection: numba JIT by default, pure NumPy/Python fallback.

Set ``NAVFIELD_NUMBA=0`` (or ``false``/``off``) before import to disable JIT
compilation; the same kernel source then runs as plain Python.  Useful for
debugging, for platforms without numba, and for the backend benchmark.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("NAVFIELD_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _FLAG not in ("0", "false", "off", "no")

try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    _numba = None
    HAVE_NUMBA = False

USING_NUMBA = NUMBA_REQUESTED and HAVE_NUMBA


def njit(func=None, **kwargs):
    """``numba.njit`` when the numba backend is active, identity otherwise."""
    if not USING_NUMBA:
        if func is None:
            return lambda f: f
        return func
    opts = dict(cache=True, nogil=True)
    opts.update(kwargs)
    if func is None:
        return _numba.njit(**opts)
    return _numba.njit(**opts)(func)


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"

