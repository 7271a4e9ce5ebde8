"""Kernel selection: the compiled extension when importable, else numpy.

Set ``EXPDYN_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("EXPDYN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"

escape_counts = _impl.escape_counts
bbox_pairs = _impl.bbox_pairs
