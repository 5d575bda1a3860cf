"""Backend selection for the time-step kernel.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``HALFKDV_PURE_PYTHON`` is set to ``1``, the numpy
fallback is used. ``BACKEND`` names the active choice.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("HALFKDV_PURE_PYTHON", "") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('cython', 'python' or None)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


picard_step = _impl.picard_step
apply_f = _impl.apply_f
band_solve = _impl.band_solve
prepare_factor = _impl.prepare_factor
