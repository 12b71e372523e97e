"""Pick the compiled kernels when available, else the numpy fallback."""

from __future__ import annotations

import os

from . import _fallback

BACKEND: str

if os.environ.get("RMTCORR_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

jacobi_eigh = _impl.jacobi_eigh
increasing_path_sum = _impl.increasing_path_sum

__all__ = ["BACKEND", "jacobi_eigh", "increasing_path_sum"]
