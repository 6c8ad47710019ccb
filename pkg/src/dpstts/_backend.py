"""Selects the kernel implementation at import time.

Set ``DPSTTS_PURE_PYTHON=1`` to force the pure-Python kernels even when the
compiled extension is importable.
"""
import os

from . import _pykernels

if os.environ.get("DPSTTS_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = _pykernels

BACKEND = kernels.NAME
