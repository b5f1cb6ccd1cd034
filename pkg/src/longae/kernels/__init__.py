"""Hot numeric kernels with a selectable backend.

``LONGAE_BACKEND=numba`` (default when numba imports) uses the compiled
kernels; ``LONGAE_BACKEND=numpy`` forces the pure-numpy path. The choice is
made once at import time.
"""
import os
import warnings

from . import _numpy

BACKEND = os.environ.get("LONGAE_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ValueError(f"LONGAE_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    try:
        from . import _numba as _impl
    except ImportError:
        warnings.warn("numba not importable, falling back to numpy kernels", RuntimeWarning)
        BACKEND = "numpy"
        _impl = _numpy
else:
    _impl = _numpy

mvn_forward = _impl.mvn_forward
mvn_backward = _impl.mvn_backward
masked_bce_rows = _impl.masked_bce_rows
adam_update = _impl.adam_update

__all__ = ["BACKEND", "mvn_forward", "mvn_backward", "masked_bce_rows", "adam_update"]
