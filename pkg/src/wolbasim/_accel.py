"""Backend selection for the numerical kernels.

The hot loops in :mod:`wolbasim.kernels` are written in nopython-compatible
Python and compiled with numba when it is available.  The environment
variable ``WOLBASIM_NUMBA`` overrides the default:

* ``0`` / ``false`` / ``off`` / ``no``  -> force the pure-Python/numpy path
* ``1`` / ``true``  / ``on``  / ``yes`` -> require numba (ImportError if absent)
* ``auto`` or unset                     -> use numba when importable

Both backends execute the same source, so results match to floating-point
rounding.  ``benchmarks/compare_backends.py`` measures the speed difference.
"""

from __future__ import annotations

import os

_FALSY = ("0", "false", "off", "no")
_TRUTHY = ("1", "true", "on", "yes")

_flag = os.environ.get("WOLBASIM_NUMBA", "auto").strip().lower()

if _flag in _FALSY:
    NUMBA_ENABLED = False
elif _flag in _TRUTHY or _flag in ("auto", ""):
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _flag in _TRUTHY:
            raise ImportError(
                "WOLBASIM_NUMBA=%s requires numba, which is not importable" % _flag
            )
        NUMBA_ENABLED = False
else:
    raise ValueError(
        "unrecognized WOLBASIM_NUMBA value %r; use 0/1/auto" % _flag
    )


def jit(func):
    """Compile ``func`` with numba when enabled, otherwise return it as is.

    cache=True persists compiled code across processes.  Only applied to
    module-level kernels (closures cannot be cached).
    """
    if NUMBA_ENABLED:
        from numba import njit

        return njit(cache=True)(func)
    return func
