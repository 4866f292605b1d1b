"""Hot-loop kernels with a compiled core and a numpy fallback.

The native extension is preferred when importable; set PRIVSTREAM_PURE=1 to
force the fallback. `BACKEND` reports which one is live. Wrappers coerce
inputs so both backends see identical contiguous float64 arrays.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("PRIVSTREAM_PURE"):
    from . import _pyref as _impl

    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        from . import _pyref as _impl

        BACKEND = "python"


def _f64(a, ndim):
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got {out.ndim}-d")
    return out


def locate_digits(coords, lows, highs, fanout: int, depth: int):
    """Child-index digits (n, depth) locating each point down the partition tree."""
    coords = _f64(coords, 2)
    lows = _f64(lows, 1)
    highs = _f64(highs, 1)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return _impl.locate_digits(coords, lows, highs, fanout, depth)


def count_in_boxes(xs, ys, boxes):
    """Counts of points in half-open boxes [x0,x1)x[y0,y1); xs must be sorted."""
    xs = _f64(xs, 1)
    ys = _f64(ys, 1)
    boxes = _f64(boxes, 2)
    if boxes.shape[1] != 4:
        raise ValueError("boxes must have shape (m, 4)")
    return _impl.count_in_boxes(xs, ys, boxes)
