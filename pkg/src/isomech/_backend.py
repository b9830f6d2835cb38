"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``ISOMECH_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from isomech import _kernels_py

if os.environ.get("ISOMECH_PURE_PYTHON") == "1":
    kernels = _kernels_py
    COMPILED = False
else:
    try:
        from isomech import _kernels as kernels  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        kernels = _kernels_py
        COMPILED = False

BACKEND = "cython" if COMPILED else "python"

__all__ = ["kernels", "COMPILED", "BACKEND"]
