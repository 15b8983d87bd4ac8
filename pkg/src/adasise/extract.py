"""Phase 1: collect pooling-layer feature maps and their gradient scores.

Each captured map k gets a score, the class-logit gradient summed over
the map's full spatial domain. Scores are normalized by the layer
maximum; a layer whose maximum is not positive is flagged (it will
contribute an empty selection downstream instead of aborting the run).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger("adasise")


@dataclass
class LayerGradientReport:
    layer_index: int  # 1-based pooling position p
    feature_maps: np.ndarray  # (M, h, w)
    sigma: np.ndarray  # (M,) float64, gradient sum per map
    rho: float  # max of sigma
    upsilon: np.ndarray | None  # sigma / rho, None when rho <= 0

    @property
    def num_maps(self) -> int:
        return int(self.sigma.size)

    @property
    def has_positive(self) -> bool:
        return self.rho > 0.0


def build_report(layer_index, feature_maps, grad_maps) -> LayerGradientReport:
    sigma = grad_maps.astype(np.float64, copy=False).sum(axis=(1, 2))
    rho = float(sigma.max())
    if rho > 0.0:
        upsilon = sigma / rho
    else:
        upsilon = None
        log.warning(
            "pooling layer %d: no positive gradients (max score %.3g); empty selection",
            layer_index,
            rho,
        )
    return LayerGradientReport(
        layer_index=layer_index,
        feature_maps=feature_maps,
        sigma=sigma,
        rho=rho,
        upsilon=upsilon,
    )


def extract_all(model, image, class_index) -> list:
    """Reports for every pooling layer, shallow to deep, off one backward pass."""
    capture, grads = model.capture_and_gradients(image, class_index)
    return [
        build_report(p + 1, capture.feature_maps[p], grads[p])
        for p in range(model.num_pooling)
    ]


def extract_layer(model, image, class_index, layer_index) -> LayerGradientReport:
    if not 1 <= layer_index <= model.num_pooling:
        raise ValueError(
            "pooling layer index %d outside [1, %d]" % (layer_index, model.num_pooling)
        )
    return extract_all(model, image, class_index)[layer_index - 1]


def gradient_histogram(report: LayerGradientReport, bins: int = 32):
    """(bin_left_edge, count) pairs over the per-map scores.

    Uses the normalized scores when they are defined, the raw sums
    otherwise; either way every map lands in exactly one bin.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    values = report.upsilon if report.upsilon is not None else report.sigma
    counts, edges = np.histogram(values, bins=bins)
    return [(float(e), int(c)) for e, c in zip(edges[:-1], counts)]
