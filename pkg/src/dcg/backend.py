"""Kernel backend selection.

Hot loops (configuration enumeration, marginal accumulation, Gibbs sweeps,
per-site conditional gradients) exist in two interchangeable versions: a
numba ``@njit`` build and a pure-numpy build. The active backend is chosen
at import time from the ``DCG_BACKEND`` environment variable:

    DCG_BACKEND=numba   require numba (error if unavailable)
    DCG_BACKEND=numpy   force the pure-numpy path
    unset / auto        numba if importable, numpy otherwise

and can be switched at runtime with :func:`set_backend` (used by the tests
and by ``benchmarks/bench_kernels.py`` to compare the two).
"""

from __future__ import annotations

import importlib
import os

_VALID = ("numba", "numpy")

_active_name: str | None = None
_active_module = None


def _resolve_default() -> str:
    flag = os.environ.get("DCG_BACKEND", "auto").strip().lower()
    if flag in _VALID:
        return flag
    if flag not in ("", "auto"):
        raise ValueError(f"DCG_BACKEND must be 'numba', 'numpy' or 'auto', got {flag!r}")
    try:
        importlib.import_module("numba")
        return "numba"
    except ImportError:
        return "numpy"


def set_backend(name: str) -> None:
    """Select the kernel implementation ('numba' or 'numpy')."""
    global _active_name, _active_module
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}; expected one of {_VALID}")
    if name == "numba":
        module = importlib.import_module("dcg._kernels_numba")
    else:
        module = importlib.import_module("dcg._kernels_numpy")
    _active_name = name
    _active_module = module


def get_backend() -> str:
    """Name of the active backend."""
    if _active_name is None:
        set_backend(_resolve_default())
    return _active_name  # type: ignore[return-value]


def kernels():
    """Module object holding the active kernel implementations."""
    if _active_module is None:
        set_backend(_resolve_default())
    return _active_module
