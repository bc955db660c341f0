"""Kernel backend selection.

The compiled extension is used when importable; setting the environment
variable ``STOCHCURVE_BACKEND=python`` forces the numpy/scipy fallback.
"""
import os

from . import _fallback


def _load(name=None):
    name = name or os.environ.get("STOCHCURVE_BACKEND", "auto")
    if name not in ("auto", "compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "python":
        return "python", _fallback
    try:
        from . import _kernels
    except ImportError:
        if name == "compiled":
            raise
        return "python", _fallback
    return "compiled", _kernels


BACKEND, kernels = _load()


def get_kernels(name):
    """Return the kernel module for ``name`` ('compiled' or 'python')."""
    return _load(name)[1]
