"""Backend selection for the compiled kernels.

Set ``QHIST_DISABLE_NUMBA=1`` before import to force the pure-numpy path.
"""
from __future__ import annotations

import os

_FLAG = "QHIST_DISABLE_NUMBA"


def _truthy(value: str | None) -> bool:
    return (value or "").strip().lower() in {"1", "true", "yes", "on"}


# TBB is tried first by default and warns on older system builds
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _truthy(os.environ.get(_FLAG))


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if NUMBA_AVAILABLE:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


if NUMBA_AVAILABLE:
    prange = _numba.prange
else:  # pragma: no cover
    prange = range


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_workers(n: int | None) -> int:
    """Cap the compiled kernels' thread pool; returns the count in effect."""
    if not NUMBA_AVAILABLE:
        return 1
    if n is not None:
        _numba.set_num_threads(max(1, min(int(n), _numba.config.NUMBA_NUM_THREADS)))
    return int(_numba.get_num_threads())
