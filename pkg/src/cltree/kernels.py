"""Backend selection for the hot inner-loop kernels.

The compiled extension (``cltree._kernels``) is used when it was built;
otherwise, or when ``CLTREE_PURE_PYTHON=1`` is set, the pure-Python twins in
``cltree._kernels_py`` are used. Both produce bit-identical results.
"""

import os

from . import _kernels_py

if os.environ.get("CLTREE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

cartpole_step = _impl.cartpole_step
greedy_action = _impl.greedy_action
q_update = _impl.q_update
q_update_batch = _impl.q_update_batch
discretize = _impl.discretize

__all__ = [
    "BACKEND",
    "cartpole_step",
    "greedy_action",
    "q_update",
    "q_update_batch",
    "discretize",
]
