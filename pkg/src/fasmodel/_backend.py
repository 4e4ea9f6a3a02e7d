"""Kernel backend selection.

The compiled extension is used when it imports; setting the environment
variable ``FASMODEL_PURE_PYTHON=1`` before import forces the pure-Python
kernels.  Both expose the same functions.
"""
import os

from . import _pykernels

kernels = None
if os.environ.get("FASMODEL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        kernels = None
if kernels is None:
    kernels = _pykernels

BACKEND = "compiled" if kernels is not _pykernels else "python"


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["compiled"] = _ckernels
    return out
