"""Numba-accelerated hot kernels with pure-numpy fallbacks.

The backend is picked once at import time from the environment:
``GHOSTBEACON_DISABLE_NUMBA=1`` forces the numpy path, as does a missing
numba installation.  ``set_backend()`` switches at runtime (used by the
test suite and by ``benchmarks/benchmark_kernels.py``).

Kernels never draw random numbers; callers pass pre-drawn arrays so both
backends consume identical streams.
"""

from __future__ import annotations

import os

_TRUTHY = ("1", "true", "yes", "on")

NUMPY = "numpy"
NUMBA = "numba"


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def default_backend() -> str:
    if os.environ.get("GHOSTBEACON_DISABLE_NUMBA", "").strip().lower() in _TRUTHY:
        return NUMPY
    return NUMBA if numba_available() else NUMPY


_backend = default_backend()


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in (NUMPY, NUMBA):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == NUMBA and not numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _backend = name
