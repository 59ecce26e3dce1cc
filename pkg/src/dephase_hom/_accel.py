"""
Backend selection for the numeric kernels.

Set ``DEPHASE_HOM_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Numba is
also skipped silently when it cannot be imported.
"""

import os

_FALSY = ("", "0", "false", "no", "off")


def _numba_requested():
    return os.environ.get("DEPHASE_HOM_DISABLE_NUMBA", "").strip().lower() in _FALSY


try:
    if _numba_requested():
        import numba as _numba
    else:
        _numba = None
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

HAS_NUMBA = _numba is not None
BACKEND = "numba" if HAS_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged without numba."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def thread_hint(default=1):
    """Worker-count hint from ``DEPHASE_HOM_THREADS`` (never affects results)."""
    raw = os.environ.get("DEPHASE_HOM_THREADS", "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)
