"""Dense-array primitives used throughout the pipeline.

All operations are pure functions on float32/float64 arrays (inputs in
other dtypes are promoted to float64). Divisions are guarded, so finite
inputs never produce NaN or Inf.
"""

from __future__ import annotations

import numpy as np

from . import backend
from .errors import ShapeMismatchError

_FLOATS = (np.float32, np.float64)


def _as_float(t) -> np.ndarray:
    a = np.asarray(t)
    if a.dtype.type not in _FLOATS:
        a = a.astype(np.float64)
    return np.ascontiguousarray(a)


def bilinear_resize(src, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling of a 2-D map.

    Output corners coincide with input corners when the input has at
    least two samples per axis; a singleton axis extends as a constant.
    Resizing to the input's own shape reproduces it exactly.
    """
    a = _as_float(src)
    if a.ndim != 2:
        raise ShapeMismatchError("bilinear_resize expects a 2-D map, got shape %s" % (a.shape,))
    if out_h < 1 or out_w < 1:
        raise ValueError("target size must be positive, got %dx%d" % (out_h, out_w))
    return backend.bilinear_resize2d(a, int(out_h), int(out_w))


def minmax_normalize(t) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant input maps to all zeros.

    The constant case is deliberate: a flat attribution map carries no
    spatial information and must not contribute to downstream sums.
    """
    a = _as_float(t)
    lo = a.min()
    hi = a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def hadamard(a, b) -> np.ndarray:
    """Elementwise product; a 2-D mask broadcasts over the channels of an
    H x W x C array."""
    x = _as_float(a)
    y = _as_float(b)
    if x.shape == y.shape:
        return x * y
    if x.ndim == 3 and y.ndim == 2 and x.shape[:2] == y.shape:
        return x * y[:, :, None]
    raise ShapeMismatchError("incompatible shapes %s and %s" % (x.shape, y.shape))


def otsu_binarize(heatmap, bins: int = 256) -> np.ndarray:
    """Histogram Otsu binarization of a map with values in [0, 1].

    The histogram uses `bins` equal-width bins over [0, 1]. Candidate
    thresholds are the bin edges; the one maximizing the between-class
    variance wins (ties go to the lowest edge), and entries strictly
    above it map to 1. When every value falls into a single bin there
    is nothing to separate and the result is all ones, the
    multiplicative no-op for fusion gating.
    """
    m = _as_float(heatmap)
    if m.ndim != 2:
        raise ShapeMismatchError("otsu_binarize expects a 2-D map, got shape %s" % (m.shape,))
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if m.size and (m.min() < 0.0 or m.max() > 1.0):
        raise ValueError("otsu_binarize expects values in [0, 1]")
    idx = np.minimum((m.astype(np.float64) * bins).astype(np.int64), bins - 1)
    hist = np.bincount(idx.ravel(), minlength=bins).astype(np.float64)
    if np.count_nonzero(hist) <= 1:
        return np.ones_like(m)
    centers = (np.arange(bins, dtype=np.float64) + 0.5) / bins
    n_lo = np.cumsum(hist)[:-1]
    n_hi = hist.sum() - n_lo
    mass_lo = np.cumsum(hist * centers)[:-1]
    mass_hi = (hist * centers).sum() - mass_lo
    valid = (n_lo > 0) & (n_hi > 0)
    mu_lo = np.divide(mass_lo, n_lo, out=np.zeros_like(mass_lo), where=valid)
    mu_hi = np.divide(mass_hi, n_hi, out=np.zeros_like(mass_hi), where=valid)
    var_between = np.where(valid, n_lo * n_hi * (mu_lo - mu_hi) ** 2, -1.0)
    t = int(np.argmax(var_between))  # first max: lowest threshold on ties
    theta = (t + 1) / bins
    return (m > theta).astype(m.dtype)
