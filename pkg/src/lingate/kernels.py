"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used. Setting ``LINGATE_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None
else:
    BACKENDS["compiled"] = _kernels

if os.environ.get("LINGATE_PURE_PYTHON", "") not in ("", "0") or _kernels is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None
