# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution/pooling kernels (see _kernels_py for the reference)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def im2col3x3(const double[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    out = np.zeros((n, h, w, 9, c))
    cdef double[:, :, :, :, ::1] cols = out
    cdef Py_ssize_t b, i, j, k, ch, yy, xx
    for b in range(n):
        for i in range(h):
            for j in range(w):
                for k in range(9):
                    yy = i + k // 3 - 1
                    xx = j + k % 3 - 1
                    if yy < 0 or yy >= h or xx < 0 or xx >= w:
                        continue
                    for ch in range(c):
                        cols[b, i, j, k, ch] = x[b, yy, xx, ch]
    return out.reshape(n * h * w, 9 * c)


def col2im3x3(dcols_flat, Py_ssize_t n, Py_ssize_t h, Py_ssize_t w, Py_ssize_t c):
    cdef const double[:, :, :, :, ::1] dcols = np.ascontiguousarray(dcols_flat).reshape(n, h, w, 9, c)
    out = np.zeros((n, h + 2, w + 2, c))
    cdef double[:, :, :, ::1] dxp = out
    cdef Py_ssize_t b, i, j, k, ch, dy, dx
    # k outermost: each output element accumulates in the same order as the numpy path
    for k in range(9):
        dy = k // 3
        dx = k % 3
        for b in range(n):
            for i in range(h):
                for j in range(w):
                    for ch in range(c):
                        dxp[b, i + dy, j + dx, ch] += dcols[b, i, j, k, ch]
    return out[:, 1 : h + 1, 1 : w + 1, :].copy()


def maxpool2_forward(const double[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t ho = h // 2, wo = w // 2
    out = np.empty((n, ho, wo, c))
    arg = np.empty((n, ho, wo, c), dtype=np.int8)
    cdef double[:, :, :, ::1] o = out
    cdef signed char[:, :, :, ::1] a = arg
    cdef Py_ssize_t b, i, j, ch, q
    cdef double best, v
    cdef signed char besti
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                for ch in range(c):
                    best = x[b, 2 * i, 2 * j, ch]
                    besti = 0
                    for q in range(1, 4):
                        v = x[b, 2 * i + q // 2, 2 * j + q % 2, ch]
                        if v > best:
                            best = v
                            besti = <signed char>q
                    o[b, i, j, ch] = best
                    a[b, i, j, ch] = besti
    return out, arg


def maxpool2_backward(const double[:, :, :, ::1] dout, const signed char[:, :, :, ::1] arg,
                      Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t n = dout.shape[0], ho = dout.shape[1], wo = dout.shape[2], c = dout.shape[3]
    out = np.zeros((n, h, w, c))
    cdef double[:, :, :, ::1] dx = out
    cdef Py_ssize_t b, i, j, ch, q
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                for ch in range(c):
                    q = arg[b, i, j, ch]
                    dx[b, 2 * i + q // 2, 2 * j + q % 2, ch] = dout[b, i, j, ch]
    return out
