"""Active kernel set: numba when available and not disabled, numpy otherwise."""

from __future__ import annotations

from types import ModuleType

from . import _kernels_numpy as numpy_kernels
from ._backend import USE_NUMBA

if USE_NUMBA:
    from . import _kernels_numba as numba_kernels

    active: ModuleType = numba_kernels
    BACKEND = "numba"
else:
    numba_kernels = None
    active = numpy_kernels
    BACKEND = "numpy"


def load(name: str) -> ModuleType:
    """Return the kernel module for ``name`` ("numba" or "numpy")."""
    if name == "numpy":
        return numpy_kernels
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown kernel backend {name!r}")
