"""Kernel selection: the compiled extension when importable, NumPy otherwise.

Set ``GIBBSGEO_PURE_PYTHON=1`` to force the NumPy fallback.  ``BACKEND``
records which implementation is active.
"""
import os

from . import _kernels_py

if os.environ.get("GIBBSGEO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

normalize = _impl.normalize
stationary = _impl.stationary
metric = _impl.metric
metric_jet = _impl.metric_jet
KernelConvergenceError = _impl.KernelConvergenceError

__all__ = ["BACKEND", "normalize", "stationary", "metric", "metric_jet", "KernelConvergenceError"]
