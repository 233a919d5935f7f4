"""Insertion-evaluation kernels.

The compiled extension is preferred when present; the pure-Python module is
a drop-in fallback with identical semantics. Set ``ODTSIM_PURE_PYTHON=1`` to
force the fallback (useful for debugging and benchmarking).
"""

import os

from . import pure

if os.environ.get("ODTSIM_PURE_PYTHON") == "1":
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

best_insertion = _impl.best_insertion


def backend_name() -> str:
    """Which kernel implementation was selected at import time."""
    return BACKEND
