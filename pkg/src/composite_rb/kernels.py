"""Kernel backend selection.

The compiled extension is used when importable; otherwise, or when the
environment variable ``COMPOSITE_RB_PURE`` is set to a non-empty value
other than ``0``, the NumPy fallback is used. ``BACKEND`` names the
active choice.
"""
import os

from . import _kernels_py

if os.environ.get("COMPOSITE_RB_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

chain_product = _impl.chain_product
drive_product = _impl.drive_product

__all__ = ["BACKEND", "chain_product", "drive_product"]
