"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``SLEEPADAPT_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("SLEEPADAPT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

forward = _impl.forward
backward = _impl.backward
xi_sum = _impl.xi_sum
viterbi = _impl.viterbi
nearest_neighbor_1d = _impl.nearest_neighbor_1d

__all__ = [
    "BACKEND",
    "forward",
    "backward",
    "xi_sum",
    "viterbi",
    "nearest_neighbor_1d",
]
