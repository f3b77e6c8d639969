"""Selects the compiled kernels when available.

Set ``PDTS_PURE=1`` to force the pure fallback.  ``BACKEND`` names the
implementation in use.
"""

from __future__ import annotations

import os

from . import _pykernels as pure

compiled = None
if os.environ.get("PDTS_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled  # type: ignore[no-redef]
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "python"

eval_all = _impl.eval_all
world_log_weights = _impl.world_log_weights
walk = _impl.walk

__all__ = ["BACKEND", "eval_all", "world_log_weights", "walk", "pure", "compiled"]
