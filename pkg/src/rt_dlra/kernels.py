"""Backend selection for the upwind kernel.

The compiled extension is used when it imports; setting the environment
variable ``RT_DLRA_PURE_PYTHON=1`` forces the NumPy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("RT_DLRA_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def upwind_diff(a, lo, hi, signs, inv_h, axis, scale=None, backend=None):
    """Direction-split first-order differences along ``axis`` of a 3-D block.

    Column ``k`` of ``a`` (last axis) gets the backward difference when
    ``signs[k] > 0`` (``lo`` is the ghost line before the first cell), the
    forward difference when ``signs[k] < 0`` (``hi`` is the ghost line after
    the last cell) and zero otherwise; the result is multiplied by
    ``scale[k] * inv_h``.

    Parameters
    ----------
    a : (n0, n1, m) array
    lo, hi : (n1, m) arrays for ``axis=0``, (n0, m) for ``axis=1``
    signs : (m,) integer array with entries in {-1, 0, 1}
    """
    mod = _BACKENDS[backend or BACKEND]
    m = a.shape[2]
    signs = np.ascontiguousarray(signs, dtype=np.int8)
    scale = np.ones(m) if scale is None else np.ascontiguousarray(scale, dtype=float)
    return mod.upwind_diff(np.ascontiguousarray(a, dtype=float),
                           np.ascontiguousarray(lo, dtype=float),
                           np.ascontiguousarray(hi, dtype=float),
                           signs, scale, float(inv_h), int(axis))
