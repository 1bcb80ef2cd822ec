"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``ELIMPOSE_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy versions are used.
"""

from __future__ import annotations

import os

from . import _kernels_py

_force_py = os.environ.get("ELIMPOSE_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py

instantiate = _impl.instantiate
gauss_jordan = _impl.gauss_jordan


def backends() -> dict:
    """Available implementations keyed by name (for benchmarks and tests)."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
