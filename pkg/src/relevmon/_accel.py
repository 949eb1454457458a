"""Backend selection for the hot numerical kernels.

Set ``RELEVMON_BACKEND=numpy`` (or ``RELEVMON_DISABLE_NUMBA=1``) before import
to force the pure-numpy code paths.
"""
import os
from typing import Any, Callable

_DISABLED = os.environ.get("RELEVMON_DISABLE_NUMBA", "").strip() not in ("", "0") or (
    os.environ.get("RELEVMON_BACKEND", "").strip().lower() == "numpy"
)

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args: Any, **_: Any) -> Callable:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"
