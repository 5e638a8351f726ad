"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy kernels.
Set ``HSICD_KERNELS=python`` to force the fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available():
    return sorted(_BACKENDS)


def get_kernels(name=None):
    if name is None:
        name = os.environ.get("HSICD_KERNELS") or ("cython" if _ckernels else "python")
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available()}") from None


kernels = get_kernels()
BACKEND = "cython" if kernels is _ckernels else "python"
