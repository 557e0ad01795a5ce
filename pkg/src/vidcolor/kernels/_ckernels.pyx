# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numpy-side kernels: clamped bilinear backward warp and masked errors."""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def warp(const double[:, :, ::1] frame, const double[:, :, ::1] flow):
    cdef Py_ssize_t C = frame.shape[0], H = frame.shape[1], W = frame.shape[2]
    out_arr = np.empty((C, H, W), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t c, y, x, x0, x1, y0, y1
    cdef double sx, sy, wx, wy, top, bot
    for y in range(H):
        for x in range(W):
            sx = x + flow[0, y, x]
            sy = y + flow[1, y, x]
            if sx < 0.0:
                sx = 0.0
            elif sx > W - 1:
                sx = W - 1
            if sy < 0.0:
                sy = 0.0
            elif sy > H - 1:
                sy = H - 1
            x0 = <Py_ssize_t>floor(sx)
            y0 = <Py_ssize_t>floor(sy)
            x1 = x0 + 1 if x0 + 1 < W else W - 1
            y1 = y0 + 1 if y0 + 1 < H else H - 1
            wx = sx - x0
            wy = sy - y0
            for c in range(C):
                top = (1.0 - wx) * frame[c, y0, x0] + wx * frame[c, y0, x1]
                bot = (1.0 - wx) * frame[c, y1, x0] + wx * frame[c, y1, x1]
                out[c, y, x] = (1.0 - wy) * top + wy * bot
    return out_arr


def sq_error_map(const double[:, :, ::1] a, const double[:, :, ::1] b):
    cdef Py_ssize_t C = a.shape[0], H = a.shape[1], W = a.shape[2]
    out_arr = np.zeros((H, W), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t c, y, x
    cdef double d
    for c in range(C):
        for y in range(H):
            for x in range(W):
                d = a[c, y, x] - b[c, y, x]
                out[y, x] += d * d
    return out_arr


def masked_sq_error(const double[:, :, ::1] a, const double[:, :, ::1] b,
                    const double[:, ::1] mask):
    """Return (sum of mask * per-pixel squared error, sum of mask)."""
    cdef Py_ssize_t C = a.shape[0], H = a.shape[1], W = a.shape[2]
    cdef Py_ssize_t c, y, x
    cdef double d, e, num = 0.0, den = 0.0
    for y in range(H):
        for x in range(W):
            if mask[y, x] == 0.0:
                continue
            e = 0.0
            for c in range(C):
                d = a[c, y, x] - b[c, y, x]
                e += d * d
            num += mask[y, x] * e
            den += mask[y, x]
    return num, den
