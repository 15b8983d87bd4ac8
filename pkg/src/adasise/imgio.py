"""Raster I/O and heatmap rendering.

PNG in and out via Pillow; encoding carries no timestamps, so identical
pixels give identical bytes and output files can be compared as
goldens. Overlays use a compact viridis-style lookup table blended at
fixed alpha.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

# viridis anchors, evenly spaced over [0, 1]
_VIRIDIS = np.array(
    [
        (0.267004, 0.004874, 0.329415),
        (0.282623, 0.140926, 0.457517),
        (0.253935, 0.265254, 0.529983),
        (0.206756, 0.371758, 0.553117),
        (0.163625, 0.471133, 0.558148),
        (0.127568, 0.566949, 0.550556),
        (0.134692, 0.658636, 0.517649),
        (0.266941, 0.748751, 0.440573),
        (0.477504, 0.821444, 0.318195),
        (0.741388, 0.873449, 0.149561),
        (0.993248, 0.906157, 0.143936),
    ],
    dtype=np.float64,
)


def read_image(path, dtype=np.float32) -> np.ndarray:
    """Decode to an (H, W, 3) array scaled into [0, 1]."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
    return np.ascontiguousarray(arr.astype(dtype))


def _to_u8(values01) -> np.ndarray:
    return np.rint(np.clip(values01, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_rgb(path, image01):
    Image.fromarray(_to_u8(image01), mode="RGB").save(path, format="PNG")


def write_grayscale(path, map01):
    Image.fromarray(_to_u8(map01), mode="L").save(path, format="PNG")


def colormap(map01) -> np.ndarray:
    """Map [0, 1] values through the viridis table; returns (H, W, 3)."""
    v = np.clip(np.asarray(map01, dtype=np.float64), 0.0, 1.0)
    pos = v * (len(_VIRIDIS) - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, len(_VIRIDIS) - 1)
    frac = (pos - lo)[..., None]
    return (1.0 - frac) * _VIRIDIS[lo] + frac * _VIRIDIS[hi]


def write_overlay(path, image01, map01, alpha=0.5):
    """Blend the colormapped heatmap over the input image."""
    base = np.asarray(image01, dtype=np.float64)
    heat = colormap(map01)
    blend = (1.0 - alpha) * base + alpha * heat
    write_rgb(path, blend)
