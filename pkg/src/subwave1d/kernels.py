"""Backend selection for the hot loops.

The compiled extension is used when it was built and ``SUBWAVE1D_PURE_PYTHON``
is not set to a true value; otherwise the NumPy versions are used.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
continue_branch = _kernels_py.continue_branch
wilson_sum = _kernels_py.wilson_sum

if os.environ.get("SUBWAVE1D_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        continue_branch = _compiled.continue_branch
        wilson_sum = _compiled.wilson_sum


def backends() -> dict:
    """All importable implementations, keyed by name (used by tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
