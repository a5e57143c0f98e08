"""Hot per-pixel kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and ``GEOSUP_PURE_PYTHON``
is unset or ``0``. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

_force_python = os.environ.get("GEOSUP_PURE_PYTHON", "0") not in ("", "0")

try:
    if _force_python:
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

bilinear_sample = _impl.bilinear_sample
smoothness = _impl.smoothness


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
