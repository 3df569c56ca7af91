"""Per-slot allocation kernels with optional compiled backend.

The compiled extension (built from _speedups.pyx) is picked at import
when present; otherwise the pure Python implementation in _pure is used.
Both produce bit-identical results. Set CSCSHARE_PURE_PYTHON=1 to force
the fallback, e.g. for benchmarking.

The compiled kernels work in 64-bit integers, so the dispatcher routes a
call to them only when production and every consumption value fit below
2**31 (products then stay below 2**62). Larger values, unrealistic for
30-minute meter data but allowed by the model, silently use the pure
Python path, which has unbounded integers.
"""

from __future__ import annotations

import os
from typing import Sequence

from cscshare.kernels import _pure

try:  # pragma: no cover - depends on the build environment
    from cscshare.kernels import _speedups
except ImportError:  # pragma: no cover
    _speedups = None

if os.environ.get("CSCSHARE_PURE_PYTHON"):
    _speedups = None

HAVE_SPEEDUPS = _speedups is not None
BACKEND = "c" if HAVE_SPEEDUPS else "python"

# Inputs at or below this bound are safe for the 64-bit kernels.
_C_SAFE_MAX = 2**31 - 1


def _c_safe(production: int, consumption: Sequence[int]) -> bool:
    if production > _C_SAFE_MAX:
        return False
    for c in consumption:
        if c > _C_SAFE_MAX:
            return False
    return True


def static_shares(
    production: int, kors: Sequence[float], consumption: Sequence[int]
) -> tuple[list[int], int]:
    if _speedups is not None and _c_safe(production, consumption):
        return _speedups.static_shares(production, kors, consumption)
    return _pure.static_shares(production, kors, consumption)


def proportional_shares(
    production: int, consumption: Sequence[int]
) -> tuple[list[int], int]:
    if _speedups is not None and _c_safe(production, consumption):
        return _speedups.proportional_shares(production, consumption)
    return _pure.proportional_shares(production, consumption)


def waterfall_shares(
    production: int, consumption: Sequence[int]
) -> tuple[list[int], int]:
    if _speedups is not None and _c_safe(production, consumption):
        return _speedups.waterfall_shares(production, consumption)
    return _pure.waterfall_shares(production, consumption)
