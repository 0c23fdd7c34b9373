"""Backend selection for the hot kernels.

Set ``MORREY_NUMBA=0`` to force the pure-numpy path (numba is then never
imported).  ``MORREY_THREADS`` caps numba's thread pool.
"""
from __future__ import annotations

import os

_FALSEY = {"0", "false", "no", "off"}


def _want_numba() -> bool:
    return os.environ.get("MORREY_NUMBA", "1").strip().lower() not in _FALSEY


HAVE_NUMBA = False
if _want_numba():
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA

if HAVE_NUMBA:
    _threads = os.environ.get("MORREY_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def njit(func):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_backend(name: str) -> None:
    """Switch dispatch at runtime (used by the benchmark and the tests)."""
    global USE_NUMBA
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        USE_NUMBA = True
    elif name == "numpy":
        USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")
