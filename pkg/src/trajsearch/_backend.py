"""Kernel backend selection.

Set ``TRAJSEARCH_DISABLE_NUMBA=1`` to run the pure-numpy kernels even when
numba is importable. The choice is made once, at import time.
"""

from __future__ import annotations

import os

_FLAG = "TRAJSEARCH_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and numba_requested()
