"""Vectorized NumPy implementations of the hot kernels.

Drop-in fallback for the compiled extension. Signatures and numeric
conventions (zero padding, pooling tie-breaks, the corner-aligned
interpolation grid) match ``_kernels.pyx``; accumulation order may
differ, so float results can disagree with the compiled core by a few
ulp.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

IS_COMPILED = False


def _corr3x3(x, w):
    # x: (H, W, Ci), w: (3, 3, Ci, Co) -> (H, W, Co), stride 1, zero pad 1
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    win = sliding_window_view(xp, (3, 3), axis=(0, 1))  # (H, W, Ci, 3, 3)
    return np.tensordot(win, w, axes=([3, 4, 2], [0, 1, 2]))


def conv2d_forward(x, w, bias):
    y = _corr3x3(x, w)
    y += bias
    return np.ascontiguousarray(y)


def conv2d_input_grad(dy, w):
    # dx[a,b,ci] = sum_{ki,kj,co} w[ki,kj,ci,co] * dy[a+1-ki, b+1-kj, co]
    wt = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
    return np.ascontiguousarray(_corr3x3(dy, wt))


def maxpool2_forward(x):
    h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    win = x.reshape(h2, 2, w2, 2, c).transpose(0, 2, 1, 3, 4).reshape(h2, w2, 4, c)
    arg = win.argmax(axis=2)  # first max in row-major window order
    y = np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return np.ascontiguousarray(y), arg.astype(np.uint8)


def maxpool2_backward(dy, arg):
    h2, w2, c = dy.shape
    dwin = np.zeros((h2, w2, 4, c), dtype=dy.dtype)
    np.put_along_axis(dwin, arg.astype(np.intp)[:, :, None, :], dy[:, :, None, :], axis=2)
    dx = dwin.reshape(h2, w2, 2, 2, c).transpose(0, 2, 1, 3, 4).reshape(h2 * 2, w2 * 2, c)
    return np.ascontiguousarray(dx)


def avgpool2_forward(x):
    h, w, c = x.shape
    v = x.reshape(h // 2, 2, w // 2, 2, c)
    y = (v.sum(axis=(1, 3)) * x.dtype.type(0.25)).astype(x.dtype, copy=False)
    return np.ascontiguousarray(y)


def avgpool2_backward(dy):
    h2, w2, c = dy.shape
    dx = np.empty((h2 * 2, w2 * 2, c), dtype=dy.dtype)
    q = dy * dy.dtype.type(0.25)
    dx.reshape(h2, 2, w2, 2, c)[:] = q[:, None, :, None, :]
    return dx


def _grid(out_n, in_n):
    # corner-aligned sample coordinates; exact at the corners
    if out_n > 1 and in_n > 1:
        return (np.arange(out_n) * (in_n - 1)) / (out_n - 1)
    return np.zeros(out_n, dtype=np.float64)


def bilinear_resize2d(src, out_h, out_w):
    h, w = src.shape
    s = src.astype(np.float64, copy=False)
    ys = _grid(out_h, h)
    xs = _grid(out_w, w)
    y0 = np.minimum(ys.astype(np.int64), max(h - 2, 0))
    x0 = np.minimum(xs.astype(np.int64), max(w - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = (1.0 - fx) * s[np.ix_(y0, x0)] + fx * s[np.ix_(y0, x1)]
    bot = (1.0 - fx) * s[np.ix_(y1, x0)] + fx * s[np.ix_(y1, x1)]
    out = (1.0 - fy) * top + fy * bot
    return np.ascontiguousarray(out.astype(src.dtype, copy=False))
