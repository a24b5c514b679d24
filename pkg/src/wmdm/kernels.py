"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
reference implementation is used. Set ``WMDM_PURE_PYTHON=1`` to force the
fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

OPEN, HALF, CLOSED = _kernels_py.OPEN, _kernels_py.HALF, _kernels_py.CLOSED

_impl = _kernels_py
BACKEND = "python"
if not os.environ.get("WMDM_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

ball_masses = _impl.ball_masses
pair_ball_masses = _impl.pair_ball_masses
node_dijkstra = _impl.node_dijkstra

__all__ = ["BACKEND", "OPEN", "HALF", "CLOSED", "ball_masses",
           "pair_ball_masses", "node_dijkstra"]
