# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: 3x3 convolution, 2x2 pooling, bilinear resize.

Single-threaded on purpose; parallelism lives above these calls (one
masked forward pass per worker), which keeps every reduction order
fixed and results bit-reproducible across worker counts.
"""

import numpy as np

IS_COMPILED = True

ctypedef fused floating:
    float
    double


cdef inline object _dtype_of(floating v):
    if floating is float:
        return np.float32
    return np.float64


def conv2d_forward(floating[:, :, ::1] x, floating[:, :, :, ::1] w, floating[::1] bias):
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], Ci = x.shape[2], Co = w.shape[3]
    out = np.empty((H, W, Co), dtype=_dtype_of(x[0, 0, 0]))
    cdef floating[:, :, ::1] y = out
    cdef Py_ssize_t i, j, ki, kj, ci, co, ii, jj
    cdef floating xv
    with nogil:
        for i in range(H):
            for j in range(W):
                for co in range(Co):
                    y[i, j, co] = bias[co]
                for ki in range(3):
                    ii = i + ki - 1
                    if ii < 0 or ii >= H:
                        continue
                    for kj in range(3):
                        jj = j + kj - 1
                        if jj < 0 or jj >= W:
                            continue
                        for ci in range(Ci):
                            xv = x[ii, jj, ci]
                            for co in range(Co):
                                y[i, j, co] += xv * w[ki, kj, ci, co]
    return out


def conv2d_input_grad(floating[:, :, ::1] dy, floating[:, :, :, ::1] w):
    cdef Py_ssize_t H = dy.shape[0], W = dy.shape[1], Ci = w.shape[2], Co = w.shape[3]
    out = np.zeros((H, W, Ci), dtype=_dtype_of(dy[0, 0, 0]))
    cdef floating[:, :, ::1] dx = out
    cdef Py_ssize_t a, b, ki, kj, ci, co, ii, jj
    cdef floating acc
    with nogil:
        for a in range(H):
            for b in range(W):
                for ki in range(3):
                    ii = a + 1 - ki
                    if ii < 0 or ii >= H:
                        continue
                    for kj in range(3):
                        jj = b + 1 - kj
                        if jj < 0 or jj >= W:
                            continue
                        for ci in range(Ci):
                            acc = 0
                            for co in range(Co):
                                acc += w[ki, kj, ci, co] * dy[ii, jj, co]
                            dx[a, b, ci] += acc
    return out


def maxpool2_forward(floating[:, :, ::1] x):
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], C = x.shape[2]
    cdef Py_ssize_t H2 = H // 2, W2 = W // 2
    out = np.empty((H2, W2, C), dtype=_dtype_of(x[0, 0, 0]))
    arg = np.empty((H2, W2, C), dtype=np.uint8)
    cdef floating[:, :, ::1] y = out
    cdef unsigned char[:, :, ::1] am = arg
    cdef Py_ssize_t i, j, c, di, dj
    cdef floating best, v
    cdef unsigned char bi
    with nogil:
        for i in range(H2):
            for j in range(W2):
                for c in range(C):
                    best = x[2 * i, 2 * j, c]
                    bi = 0
                    for di in range(2):
                        for dj in range(2):
                            if di == 0 and dj == 0:
                                continue
                            v = x[2 * i + di, 2 * j + dj, c]
                            if v > best:  # strict: ties keep first in row-major order
                                best = v
                                bi = <unsigned char> (2 * di + dj)
                    y[i, j, c] = best
                    am[i, j, c] = bi
    return out, arg


def maxpool2_backward(floating[:, :, ::1] dy, unsigned char[:, :, ::1] arg):
    cdef Py_ssize_t H2 = dy.shape[0], W2 = dy.shape[1], C = dy.shape[2]
    out = np.zeros((H2 * 2, W2 * 2, C), dtype=_dtype_of(dy[0, 0, 0]))
    cdef floating[:, :, ::1] dx = out
    cdef Py_ssize_t i, j, c
    cdef unsigned char a
    with nogil:
        for i in range(H2):
            for j in range(W2):
                for c in range(C):
                    a = arg[i, j, c]
                    dx[2 * i + (a >> 1), 2 * j + (a & 1), c] = dy[i, j, c]
    return out


def avgpool2_forward(floating[:, :, ::1] x):
    cdef Py_ssize_t H2 = x.shape[0] // 2, W2 = x.shape[1] // 2, C = x.shape[2]
    out = np.empty((H2, W2, C), dtype=_dtype_of(x[0, 0, 0]))
    cdef floating[:, :, ::1] y = out
    cdef Py_ssize_t i, j, c
    with nogil:
        for i in range(H2):
            for j in range(W2):
                for c in range(C):
                    y[i, j, c] = (x[2 * i, 2 * j, c] + x[2 * i, 2 * j + 1, c]
                                  + x[2 * i + 1, 2 * j, c] + x[2 * i + 1, 2 * j + 1, c]) * <floating> 0.25
    return out


def avgpool2_backward(floating[:, :, ::1] dy):
    cdef Py_ssize_t H2 = dy.shape[0], W2 = dy.shape[1], C = dy.shape[2]
    out = np.empty((H2 * 2, W2 * 2, C), dtype=_dtype_of(dy[0, 0, 0]))
    cdef floating[:, :, ::1] dx = out
    cdef Py_ssize_t i, j, c
    cdef floating q
    with nogil:
        for i in range(H2):
            for j in range(W2):
                for c in range(C):
                    q = dy[i, j, c] * <floating> 0.25
                    dx[2 * i, 2 * j, c] = q
                    dx[2 * i, 2 * j + 1, c] = q
                    dx[2 * i + 1, 2 * j, c] = q
                    dx[2 * i + 1, 2 * j + 1, c] = q
    return out


def bilinear_resize2d(floating[:, ::1] src, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    out = np.empty((out_h, out_w), dtype=_dtype_of(src[0, 0]))
    cdef floating[:, ::1] y = out
    cdef Py_ssize_t i, j, y0, x0, y1, x1
    cdef double sy, sx, fy, fx, top, bot
    with nogil:
        for i in range(out_h):
            if out_h > 1 and h > 1:
                sy = (i * (h - 1)) / <double> (out_h - 1)
            else:
                sy = 0.0
            y0 = <Py_ssize_t> sy
            if y0 > h - 2:
                y0 = h - 2
            if y0 < 0:
                y0 = 0
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1
            fy = sy - y0
            for j in range(out_w):
                if out_w > 1 and w > 1:
                    sx = (j * (w - 1)) / <double> (out_w - 1)
                else:
                    sx = 0.0
                x0 = <Py_ssize_t> sx
                if x0 > w - 2:
                    x0 = w - 2
                if x0 < 0:
                    x0 = 0
                x1 = x0 + 1
                if x1 > w - 1:
                    x1 = w - 1
                fx = sx - x0
                top = (1.0 - fx) * src[y0, x0] + fx * src[y0, x1]
                bot = (1.0 - fx) * src[y1, x0] + fx * src[y1, x1]
                y[i, j] = <floating> ((1.0 - fy) * top + fy * bot)
    return out
