"""Select the theta-series kernel implementation at import time.

The compiled extension is preferred; setting ``DELLSYS_BACKEND=python``
forces the numpy fallback (used by the benchmark and the parity tests).
"""
import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("DELLSYS_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _pykernels
