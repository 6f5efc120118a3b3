"""Backend selection for the sampler kernels.

The compiled numba kernels are used when numba imports cleanly, unless the
environment variable ``BENCHSAE_DISABLE_NUMBA`` is set to a true value
(``1``, ``true``, ``yes``), in which case the pure-numpy kernels run. Both
backends consume random numbers identically.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _numpy

ENV_FLAG = "BENCHSAE_DISABLE_NUMBA"
BACKENDS = ("numba", "numpy")

OK = _numpy.OK
NONFINITE = _numpy.NONFINITE
REJECTION_STALLED = _numpy.REJECTION_STALLED

_numba_module: ModuleType | None = None
_numba_error: Exception | None = None


def _load_numba() -> ModuleType | None:
    global _numba_module, _numba_error
    if _numba_module is None and _numba_error is None:
        try:
            from . import _numba as mod
        except Exception as exc:  # ImportError, or numba failing to initialise
            _numba_error = exc
        else:
            _numba_module = mod
    return _numba_module


def numba_available() -> bool:
    return _load_numba() is not None


def numba_disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def active_backend(backend: str | None = None) -> str:
    """Resolve a backend name; an explicit argument overrides the environment."""
    if backend is not None:
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
        if backend == "numba" and not numba_available():
            raise RuntimeError(f"numba backend requested but unavailable: {_numba_error}")
        return backend
    if numba_disabled_by_env() or not numba_available():
        return "numpy"
    return "numba"


def get_kernels(backend: str | None = None) -> ModuleType:
    return _numba_module if active_backend(backend) == "numba" else _numpy
