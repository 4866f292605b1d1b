# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: point location and box counting.

Must stay semantically identical to `_pyref.py`, including the exact cut
arithmetic `lo + (hi - lo) * i / fanout`, so either backend can serve the
same run.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAX_DIM = 32


def locate_digits(double[:, ::1] coords, double[::1] lows, double[::1] highs,
                  int fanout, int depth):
    """Per-point path digits down to `depth`, splitting dims round-robin."""
    cdef Py_ssize_t n = coords.shape[0]
    cdef Py_ssize_t dim = coords.shape[1]
    if dim > MAX_DIM:
        raise ValueError(f"dim {dim} exceeds kernel limit {MAX_DIM}")
    out = np.empty((n, depth), dtype=np.uint8)
    cdef unsigned char[:, ::1] ov = out
    cdef double clo[MAX_DIM]
    cdef double chi[MAX_DIM]
    cdef Py_ssize_t p, level, j
    cdef int i, digit
    cdef double x, lo, hi, cut
    for p in range(n):
        for j in range(dim):
            clo[j] = lows[j]
            chi[j] = highs[j]
        for level in range(depth):
            j = level % dim
            x = coords[p, j]
            lo = clo[j]
            hi = chi[j]
            digit = fanout - 1
            for i in range(1, fanout):
                cut = lo + (hi - lo) * i / fanout
                if x < cut:
                    digit = i - 1
                    break
            ov[p, level] = <unsigned char>digit
            clo[j] = lo + (hi - lo) * digit / fanout
            if digit < fanout - 1:
                chi[j] = lo + (hi - lo) * (digit + 1) / fanout
    return out


cdef inline Py_ssize_t _bisect_left(double[::1] xs, double target) nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = xs.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if xs[mid] < target:
            lo = mid + 1
        else:
            hi = mid
    return lo


def count_in_boxes(double[::1] xs, double[::1] ys, double[:, ::1] boxes):
    """Count points inside each half-open box; `xs` must be ascending."""
    cdef Py_ssize_t m = boxes.shape[0]
    out = np.zeros(m, dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t q, i, lo, hi
    cdef double x0, y0, x1, y1, y
    cdef long long c
    with nogil:
        for q in range(m):
            x0 = boxes[q, 0]
            y0 = boxes[q, 1]
            x1 = boxes[q, 2]
            y1 = boxes[q, 3]
            lo = _bisect_left(xs, x0)
            hi = _bisect_left(xs, x1)
            c = 0
            for i in range(lo, hi):
                y = ys[i]
                if y0 <= y < y1:
                    c += 1
            ov[q] = c
    return out
