"""Pure numpy implementations of the hot kernels.

Semantically identical to the compiled versions in `_native.pyx`; both use
the same cut formula `lo + (hi - lo) * i / fanout` so cell assignment of
boundary points is bit-for-bit reproducible across backends.
"""

from __future__ import annotations

import numpy as np


def locate_digits(coords, lows, highs, fanout, depth):
    """Per-point path digits down to `depth`, splitting dims round-robin.

    Returns a (n_points, depth) uint8 array; digit k is the child index the
    point falls into at level k.
    """
    n, dim = coords.shape
    out = np.empty((n, depth), dtype=np.uint8)
    lo = np.broadcast_to(lows, (n, dim)).copy()
    hi = np.broadcast_to(highs, (n, dim)).copy()
    for level in range(depth):
        j = level % dim
        x = coords[:, j]
        clo, chi = lo[:, j], hi[:, j]
        width = chi - clo
        digit = np.zeros(n, dtype=np.uint8)
        for i in range(1, fanout):
            digit += x >= clo + width * i / fanout
        out[:, level] = digit
        new_lo = clo + width * digit / fanout
        new_hi = np.where(
            digit < fanout - 1, clo + width * (digit + 1.0) / fanout, chi
        )
        lo[:, j] = new_lo
        hi[:, j] = new_hi
    return out


def count_in_boxes(xs, ys, boxes):
    """Count points inside each half-open box; `xs` must be ascending.

    boxes is (m, 4) as [x0, y0, x1, y1]; a point counts when
    x0 <= x < x1 and y0 <= y < y1.
    """
    los = np.searchsorted(xs, boxes[:, 0], side="left")
    his = np.searchsorted(xs, boxes[:, 2], side="left")
    out = np.zeros(len(boxes), dtype=np.int64)
    for q in range(len(boxes)):
        seg = ys[los[q] : his[q]]
        out[q] = np.count_nonzero((seg >= boxes[q, 1]) & (seg < boxes[q, 3]))
    return out
