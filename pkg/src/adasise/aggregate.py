"""Phases 3 and 4: mask scoring and cascading fusion.

Scoring is the hot spot: one masked forward pass per surviving mask.
Passes may run on a thread pool (the kernels release the GIL), but the
weighted accumulation is always a serial loop in ascending map order,
so results are bit-identical across worker counts.

Fusion walks the layer maps shallow to deep; at each step the deeper
map gates the running sum through its Otsu binarization:

    f <- minmax((f + V_p) * binarize(V_p))

All-zero layer maps are skipped (an empty selection must not erase the
accumulated signal).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .extract import build_report
from .numcore import hadamard, minmax_normalize, otsu_binarize
from .selection import AdaptiveOtsu, FixedThreshold, select_and_postprocess

WORKERS_ENV = "ADASISE_WORKERS"


def resolve_workers(workers=None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        if env:
            workers = int(env)
        else:
            workers = os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def method_tag(policy) -> str:
    return "sise" if isinstance(policy, FixedThreshold) else "ada-sise"


def policy_label(policy) -> str:
    if isinstance(policy, FixedThreshold):
        return "fixed(%g)" % policy.mu
    if isinstance(policy, AdaptiveOtsu):
        return "adaptive-otsu" + ("/exclusive" if policy.exclusive_high else "")
    return repr(policy)


@dataclass
class PhaseTimings:
    extract: float = 0.0
    select: float = 0.0
    score: float = 0.0
    fuse: float = 0.0

    @property
    def total(self) -> float:
        return self.extract + self.select + self.score + self.fuse


@dataclass
class LayerVisualizationMap:
    layer_index: int
    map: np.ndarray  # (H, W) in [0, 1]
    num_forwards: int


@dataclass
class LayerSummary:
    layer_index: int
    total_maps: int
    positive_count: int
    kept_count: int
    mu_used: float


@dataclass
class ExplanationMap:
    map: np.ndarray  # (H, W) in [0, 1]
    method: str
    class_index: int
    confidence: float
    num_forwards: int
    timings: PhaseTimings
    layers: list = field(default_factory=list)


def score_masks(model, image, class_index, mask_set, workers: int = 1) -> LayerVisualizationMap:
    """Weight each attribution mask by the model's confidence on the
    masked input and average into the layer visualization map."""
    h, w = image.shape[0], image.shape[1]
    masks = mask_set.masks
    k = masks.shape[0]
    if k == 0:
        return LayerVisualizationMap(
            layer_index=mask_set.layer_index,
            map=np.zeros((h, w), dtype=image.dtype),
            num_forwards=0,
        )

    def score_one(row):
        return model.forward_score(hadamard(image, masks[row]), class_index)

    if workers > 1 and k > 1:
        with ThreadPoolExecutor(max_workers=min(workers, k)) as pool:
            scores = list(pool.map(score_one, range(k)))
    else:
        scores = [score_one(row) for row in range(k)]

    acc = np.zeros((h, w), dtype=masks.dtype)
    for row in range(k):  # fixed order: deterministic reduction
        acc += masks[row] * masks.dtype.type(scores[row])
    vmap = minmax_normalize(acc / masks.dtype.type(k))
    return LayerVisualizationMap(
        layer_index=mask_set.layer_index, map=vmap, num_forwards=k
    )


def fuse(layer_maps, otsu_bins: int = 256) -> np.ndarray:
    """Cascade the layer maps, shallow to deep, into the explanation map."""
    if not layer_maps:
        raise ValueError("fuse needs at least one layer map")
    active = [v for v in layer_maps if v.map.any()]
    if not active:
        return np.zeros_like(layer_maps[0].map)
    fused = active[0].map
    for v in active[1:]:
        gate = otsu_binarize(v.map, bins=otsu_bins)
        fused = minmax_normalize(hadamard(fused + v.map, gate))
    return fused


def explain(model, image, class_index, policy, workers=None, otsu_bins: int = 256) -> ExplanationMap:
    """Run the four-phase pipeline for one image and class."""
    workers = resolve_workers(workers)
    image = np.ascontiguousarray(np.asarray(image, dtype=model.dtype))
    h, w = model.input_shape[0], model.input_shape[1]

    t0 = time.perf_counter()
    capture, grads = model.capture_and_gradients(image, class_index)
    reports = [
        build_report(p + 1, capture.feature_maps[p], grads[p])
        for p in range(model.num_pooling)
    ]
    t1 = time.perf_counter()

    mask_sets = [select_and_postprocess(r, policy, h, w) for r in reports]
    t2 = time.perf_counter()

    vmaps = [score_masks(model, image, class_index, ms, workers) for ms in mask_sets]
    t3 = time.perf_counter()

    fused = fuse(vmaps, otsu_bins=otsu_bins)
    t4 = time.perf_counter()

    return ExplanationMap(
        map=fused,
        method=method_tag(policy),
        class_index=int(class_index),
        confidence=float(capture.probs[class_index]),
        num_forwards=sum(v.num_forwards for v in vmaps),
        timings=PhaseTimings(
            extract=t1 - t0, select=t2 - t1, score=t3 - t2, fuse=t4 - t3
        ),
        layers=[
            LayerSummary(
                layer_index=ms.layer_index,
                total_maps=ms.total_maps,
                positive_count=ms.positive_count,
                kept_count=ms.kept_count,
                mu_used=ms.mu_used,
            )
            for ms in mask_sets
        ],
    )
