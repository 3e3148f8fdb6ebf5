"""Selection between the compiled and pure-numpy LSTM kernels.

Both backends expose the same two functions with identical cache
layouts, so everything above this module is backend-agnostic.  The
compiled extension is preferred when it imported cleanly; the
``MANEUVER_REC_BACKEND`` environment variable (``auto``, ``ext``,
``python``) pins the choice at import time, and :func:`set_backend`
switches it afterwards.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import kernels_numpy

try:
    from . import _kernels_cy
except ImportError:
    _kernels_cy = None

_BACKENDS = {"python": kernels_numpy}
if _kernels_cy is not None:
    _BACKENDS["ext"] = _kernels_cy

_active = None


def available_backends() -> tuple[str, ...]:
    """Names of the kernel implementations importable in this process."""
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> str:
    """Activate a kernel backend by name.

    ``auto`` picks the compiled extension when present, else the numpy
    fallback.  Returns the name actually activated; raises ConfigError
    for unknown names or when a forced backend is unavailable.
    """
    global _active
    if name == "auto":
        name = "ext" if "ext" in _BACKENDS else "python"
    if name not in ("ext", "python"):
        raise ConfigError(f"unknown backend {name!r}; expected auto, ext, or python")
    if name not in _BACKENDS:
        raise ConfigError("backend 'ext' requested but the compiled extension is not installed")
    _active = _BACKENDS[name]
    return name


def backend_name() -> str:
    """Name of the currently active backend."""
    return _active.NAME


def get_kernels():
    """The active kernel module (lstm_layer_forward / lstm_layer_backward)."""
    return _active


set_backend(os.environ.get("MANEUVER_REC_BACKEND", "auto"))
