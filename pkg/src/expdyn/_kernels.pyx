# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: escape-time counting and segment box overlap."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, sqrt, fmin, fmax

cnp.import_array()


def escape_counts(double re_min, double re_max, double im_min, double im_max,
                  int width, int height, double lam_re, double lam_im,
                  int max_iter, double radius):
    cdef cnp.ndarray[cnp.int32_t, ndim=2] out = np.full((height, width), -1, dtype=np.int32)
    cdef int i, j, n
    cdef double x, y, m, dx, dy, r2 = radius * radius
    dx = (re_max - re_min) / (width - 1) if width > 1 else 0.0
    dy = (im_max - im_min) / (height - 1) if height > 1 else 0.0
    for i in range(height):
        for j in range(width):
            x = re_min + j * dx if width > 1 else 0.5 * (re_min + re_max)
            y = im_max - i * dy if height > 1 else 0.5 * (im_min + im_max)
            for n in range(max_iter + 1):
                if x * x + y * y > r2:
                    out[i, j] = n
                    break
                if n == max_iter:
                    break
                m = exp(x)
                x, y = m * (lam_re * cos(y) - lam_im * sin(y)), m * (lam_re * sin(y) + lam_im * cos(y))
    return out


def bbox_pairs(double[:] ax0, double[:] ay0, double[:] ax1, double[:] ay1,
               double[:] bx0, double[:] by0, double[:] bx1, double[:] by1,
               double pad, bint skip_adjacent, bint closed):
    cdef Py_ssize_t na = ax0.shape[0], nb = bx0.shape[0]
    cdef Py_ssize_t i, k, j
    cdef double alo, ahi, aylo, ayhi
    blo_np = np.minimum(np.asarray(bx0), np.asarray(bx1))
    cdef cnp.int64_t[:] order = np.argsort(blo_np, kind="stable").astype(np.int64)
    cdef double[:] blo = blo_np[np.asarray(order)].copy()
    pairs = []
    for i in range(na):
        alo = fmin(ax0[i], ax1[i]) - pad
        ahi = fmax(ax0[i], ax1[i]) + pad
        aylo = fmin(ay0[i], ay1[i]) - pad
        ayhi = fmax(ay0[i], ay1[i]) + pad
        for k in range(nb):
            if blo[k] > ahi:
                break
            j = order[k]
            if fmax(bx0[j], bx1[j]) < alo:
                continue
            if fmin(by0[j], by1[j]) > ayhi or fmax(by0[j], by1[j]) < aylo:
                continue
            if skip_adjacent:
                if j <= i + 1:
                    continue
                if closed and i == 0 and j == nb - 1:
                    continue
            pairs.append((i, j))
    pairs.sort()
    return pairs
