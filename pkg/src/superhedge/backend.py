"""Selects the tree-kernel backend at import time.

The compiled extension is preferred; the pure-Python twin is used when the
extension is unavailable.  Set ``SUPERHEDGE_BACKEND=python`` (or ``cython``)
to force a choice, e.g. for the backend benchmark.
"""

from __future__ import annotations

import os

from . import _tree_py

_requested = os.environ.get("SUPERHEDGE_BACKEND", "").strip().lower()

if _requested == "python":
    kernels = _tree_py
elif _requested == "cython":
    from . import _tree_cy as kernels  # ImportError here means no built ext
else:
    try:
        from . import _tree_cy as kernels
    except ImportError:
        kernels = _tree_py

NAME: str = kernels.NAME
