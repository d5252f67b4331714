"""Backend dispatch for the conv1d hot kernels.

The compiled extension (``trajcnn._kernels``) is preferred; if it failed to
build or import, the numpy implementation is used instead. Set
``TRAJCNN_BACKEND=python`` to force the fallback.
"""
import os
import warnings

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = None


def available_backends():
    return sorted(_BACKENDS)


def active_backend():
    return _active


def use_backend(name):
    """Select the kernel backend (``"compiled"`` or ``"python"``)."""
    global _active, conv1d_forward, conv1d_backward
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    mod = _BACKENDS[name]
    conv1d_forward = mod.conv1d_forward
    conv1d_backward = mod.conv1d_backward
    _active = name


def _default():
    requested = os.environ.get("TRAJCNN_BACKEND")
    if requested:
        if requested not in _BACKENDS:
            warnings.warn(f"TRAJCNN_BACKEND={requested!r} unavailable, falling back",
                          RuntimeWarning, stacklevel=2)
        else:
            return requested
    return "compiled" if _compiled is not None else "python"


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int) -> np.ndarray:
    raise NotImplementedError  # rebound by use_backend


def conv1d_backward(x, w, gout, pad):
    raise NotImplementedError  # rebound by use_backend


use_backend(_default())
