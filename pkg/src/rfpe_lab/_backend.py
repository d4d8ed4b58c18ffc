"""Select the rejection-sampling kernel at import time.

The compiled extension is preferred; set RFPE_LAB_PURE_PYTHON=1 to force
the numpy fallback (used by the benchmark and the backend parity tests).
"""

import os

if os.environ.get("RFPE_LAB_PURE_PYTHON"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
