"""Backend selection for the codec hot loops.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` module. Setting ``PRINTCAN_PURE_PYTHON=1`` forces
the fallback.
"""
import os

from . import _pykernels

if os.environ.get("PRINTCAN_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

crc15 = _impl.crc15
stuff = _impl.stuff
destuff = _impl.destuff


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
