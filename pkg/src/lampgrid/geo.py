"""Geo kernel facade: picks the compiled backend when available.

Set LAMPGRID_PURE_KERNELS=1 to force the pure Python kernels (useful for
benchmark comparisons and debugging).
"""

from __future__ import annotations

import os

if os.environ.get("LAMPGRID_PURE_KERNELS"):
    from lampgrid import _geokernels_py as _impl

    _BACKEND = "pure-python"
else:
    try:
        from lampgrid import _geokernels as _impl  # type: ignore[no-redef]

        _BACKEND = "compiled"
    except ImportError:
        from lampgrid import _geokernels_py as _impl  # type: ignore[no-redef]

        _BACKEND = "pure-python"

EARTH_RADIUS_M = _impl.EARTH_RADIUS_M
haversine_m = _impl.haversine_m
radius_query = _impl.radius_query


def kernel_backend() -> str:
    """Name of the active kernel backend ('compiled' or 'pure-python')."""
    return _BACKEND
