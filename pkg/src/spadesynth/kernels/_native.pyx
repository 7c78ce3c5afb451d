# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Native gather/scatter kernels for the conv and upsample hot loops.

Bit-compatible with the numpy fallback: identical per-element accumulation
order, so either backend can replay the other's runs exactly.
"""

import numpy as np

BACKEND = "native"

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] xp, int k, int stride, int ho, int wo):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1]
    if real is float:
        cols_np = np.empty((n, c, k, k, ho, wo), dtype=np.float32)
    else:
        cols_np = np.empty((n, c, k, k, ho, wo), dtype=np.float64)
    cdef real[:, :, :, :, :, ::1] cols = cols_np
    cdef Py_ssize_t b, ch, ky, kx, i, j
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ky in range(k):
                    for kx in range(k):
                        for i in range(ho):
                            for j in range(wo):
                                cols[b, ch, ky, kx, i, j] = xp[b, ch, ky + i * stride, kx + j * stride]
    return cols_np


def col2im_add(real[:, :, :, :, :, ::1] gcols, int k, int stride, real[:, :, :, ::1] gxp):
    cdef Py_ssize_t n = gcols.shape[0], c = gcols.shape[1]
    cdef Py_ssize_t ho = gcols.shape[4], wo = gcols.shape[5]
    cdef Py_ssize_t b, ch, ky, kx, i, j
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ky in range(k):
                    for kx in range(k):
                        for i in range(ho):
                            for j in range(wo):
                                gxp[b, ch, ky + i * stride, kx + j * stride] += gcols[b, ch, ky, kx, i, j]


def upsample_nearest(real[:, :, :, ::1] x, int f):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    if real is float:
        out_np = np.empty((n, c, h * f, w * f), dtype=np.float32)
    else:
        out_np = np.empty((n, c, h * f, w * f), dtype=np.float64)
    cdef real[:, :, :, ::1] out = out_np
    cdef Py_ssize_t b, ch, i, j, dy, dx
    cdef real v
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(h):
                    for j in range(w):
                        v = x[b, ch, i, j]
                        for dy in range(f):
                            for dx in range(f):
                                out[b, ch, i * f + dy, j * f + dx] = v
    return out_np


def upsample_nearest_back(real[:, :, :, ::1] g, int f):
    cdef Py_ssize_t n = g.shape[0], c = g.shape[1]
    cdef Py_ssize_t h = g.shape[2] // f, w = g.shape[3] // f
    if real is float:
        out_np = np.empty((n, c, h, w), dtype=np.float32)
    else:
        out_np = np.empty((n, c, h, w), dtype=np.float64)
    cdef real[:, :, :, ::1] out = out_np
    cdef Py_ssize_t b, ch, i, j, dy, dx
    cdef real acc
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(h):
                    for j in range(w):
                        acc = g[b, ch, i * f, j * f]
                        for dy in range(f):
                            for dx in range(f):
                                if dy != 0 or dx != 0:
                                    acc += g[b, ch, i * f + dy, j * f + dx]
                        out[b, ch, i, j] = acc
    return out_np
