"""Kernel backend selection.

The compiled extension ``fracdt._core`` is used when it imports; otherwise
(or when ``FRACDT_PURE_PYTHON`` is set to a non-empty value) the numpy
versions from ``fracdt._fallback`` are used. Both expose::

    range_scan(S, gap)
    mean_oscillation_1d(f, w)
    window_max_1d(g, w)
    mean_oscillation_2d(f, offsets)
    offset_max_2d(g, offsets)
"""

import os

import numpy as np

from . import _fallback

KERNEL_NAMES = (
    "range_scan",
    "mean_oscillation_1d",
    "window_max_1d",
    "mean_oscillation_2d",
    "offset_max_2d",
)


def _load_compiled():
    try:
        from . import _core
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()

if _compiled is not None and not os.environ.get("FRACDT_PURE_PYTHON"):
    BACKEND = "cython"
    _active = _compiled
else:
    BACKEND = "python"
    _active = _fallback


def available_backends():
    """Mapping of backend name to kernel module, compiled first if built."""
    found = {}
    if _compiled is not None:
        found["cython"] = _compiled
    found["python"] = _fallback
    return found


def range_scan(S, gap):
    return _active.range_scan(np.ascontiguousarray(S, dtype=np.float64), int(gap))


def mean_oscillation_1d(f, w):
    return _active.mean_oscillation_1d(np.ascontiguousarray(f, dtype=np.float64), int(w))


def window_max_1d(g, w):
    return _active.window_max_1d(np.ascontiguousarray(g, dtype=np.float64), int(w))


def mean_oscillation_2d(f, offsets):
    return _active.mean_oscillation_2d(
        np.ascontiguousarray(f, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.intp),
    )


def offset_max_2d(g, offsets):
    return _active.offset_max_2d(
        np.ascontiguousarray(g, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.intp),
    )
