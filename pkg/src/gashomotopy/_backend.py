"""Kernel selection.

The compiled kernels are used when the extension was built; set
``GASHOMOTOPY_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
import os

from . import _kernels_py

if os.environ.get("GASHOMOTOPY_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

dopri45 = _impl.dopri45
halton = _impl.halton
angle_increments = _impl.angle_increments

dense_eval = _kernels_py.dense_eval
DONE = _kernels_py.DONE
SNAPPED = _kernels_py.SNAPPED
CROSSED = _kernels_py.CROSSED
BLOWUP = _kernels_py.BLOWUP
UNDERFLOW = _kernels_py.UNDERFLOW
TRUNCATED = _kernels_py.TRUNCATED
