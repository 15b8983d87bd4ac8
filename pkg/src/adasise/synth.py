"""Synthetic models and datasets for demos, tests and benchmarks.

The planted-square family is the workhorse: images carry one or two
bright axis-aligned squares on low noise, and the paired detector model
is handcrafted so its class-1 logit responds to brightness routed
through every block. Ground truth is therefore known exactly, which
makes localization scores meaningful without any trained weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imgio, modelio
from .evaluation import GroundTruthAnnotation, save_annotations
from .model import (
    AvgPool2,
    Conv3x3,
    Dense,
    GlobalAvgPool,
    InspectableModel,
    MaxPool2,
    ReLU,
    Softmax,
)


def random_micro_model(
    rng,
    input_size=8,
    block_channels=(4, 6),
    num_classes=3,
    pool_kinds=("max", "avg"),
    gap_head=True,
    weight_std=0.35,
    dtype=np.float32,
):
    """A small random CNN with one pooling layer per block."""
    layers = []
    cin = 3
    size = input_size
    for b, cout in enumerate(block_channels):
        w = rng.normal(0.0, weight_std, (3, 3, cin, cout)).astype(dtype)
        bias = rng.normal(0.0, 0.1, cout).astype(dtype)
        layers.append(Conv3x3("c%d" % (b + 1), w, bias))
        layers.append(ReLU())
        kind = pool_kinds[b % len(pool_kinds)]
        layers.append(MaxPool2() if kind == "max" else AvgPool2())
        size //= 2
        cin = cout
    if gap_head:
        layers.append(GlobalAvgPool())
        din = cin
    else:
        din = size * size * cin
    wd = rng.normal(0.0, weight_std, (din, num_classes)).astype(dtype)
    bd = rng.normal(0.0, 0.1, num_classes).astype(dtype)
    layers.append(Dense("head", wd, bd))
    layers.append(Softmax())
    return InspectableModel(layers, (input_size, input_size, 3), num_classes)


def random_image(rng, model):
    h, w, c = model.input_shape
    return rng.random((h, w, c)).astype(model.dtype)


def _center_tap(cin, cout, gains, share):
    w = np.zeros((3, 3, cin, cout), dtype=np.float32)
    w[1, 1, :, :] = (gains * share)[None, :]
    return w


def planted_square_model(
    input_size=32,
    block_channels=(8, 8, 256),
    positive_fraction=0.75,
    logit_gain=8.0,
):
    """Brightness-routing detector for planted-square images.

    Every convolution propagates mean brightness with per-channel gain
    variation (every fourth deep channel uses a 3x3 blur instead of a
    center tap, so the deep maps are not all identical). The class-1
    head weight over deep channels is positive and ascending for the
    first `positive_fraction` of them and slightly negative for the
    rest, giving a spread of gradient scores with a known sign split.
    """
    layers = []
    cin = 3
    for b, cout in enumerate(block_channels[:-1]):
        gains = np.linspace(0.7, 1.3, cout).astype(np.float32)
        layers += [Conv3x3("c%d" % (b + 1), _center_tap(cin, cout, gains, 1.0 / cin)), ReLU(), MaxPool2()]
        cin = cout

    deep = block_channels[-1]
    g_deep = np.linspace(0.6, 1.4, deep).astype(np.float32)
    w_deep = np.zeros((3, 3, cin, deep), dtype=np.float32)
    for k in range(deep):
        if k % 4 == 3:
            w_deep[:, :, :, k] = g_deep[k] / (9.0 * cin)
        else:
            w_deep[1, 1, :, k] = g_deep[k] / cin
    layers += [Conv3x3("c%d" % len(block_channels), w_deep), ReLU(), MaxPool2()]

    n_pos = int(round(positive_fraction * deep))
    head = np.zeros((deep, 2), dtype=np.float32)
    ks = np.arange(deep, dtype=np.float32)
    head[:n_pos, 1] = (0.4 + 0.6 * (ks[:n_pos] + 0.5) / deep) / deep
    head[n_pos:, 1] = -0.05 / deep
    head[:, 1] *= logit_gain
    head[:, 0] = -head[:, 1]

    layers += [GlobalAvgPool(), Dense("head", head), Softmax()]
    return InspectableModel(layers, (input_size, input_size, 3), 2)


def planted_square_image(rng, size=32, square=12, noise=0.1, two_squares=False):
    """A noisy dark field with one or two bright squares; returns the
    image and its ground-truth annotation boxes (class 1)."""
    img = rng.uniform(0.02, 0.02 + noise, (size, size, 3)).astype(np.float32)

    def plant(lo_limit, hi_limit, side):
        y = int(rng.integers(lo_limit, hi_limit - side + 1))
        x = int(rng.integers(lo_limit, hi_limit - side + 1))
        img[y : y + side, x : x + side] = rng.uniform(
            0.85, 1.0, (side, side, 3)
        ).astype(np.float32)
        return (x, y, x + side, y + side)

    boxes = [plant(1, size - 1, square)]
    if two_squares:
        side = max(3, square // 2)
        boxes.append(plant(1, size - 1, side))
    return img, boxes


@dataclass
class FixturePaths:
    root: Path
    manifest: Path
    weights: Path
    images_dir: Path
    annotations: Path
    image_files: list


def write_fixture(
    root,
    n_images=8,
    seed=0,
    model=None,
    square=12,
    noise=0.1,
    two_square_every=5,
) -> FixturePaths:
    """Write a ready-to-run dataset: model files, PNGs and annotations."""
    root = Path(root)
    images_dir = root / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    if model is None:
        model = planted_square_model()
    manifest = root / "model.manifest"
    weights = root / "model.weights"
    modelio.save_model(model, manifest, weights)

    size = model.input_shape[0]
    anns = []
    files = []
    for i in range(n_images):
        name = "img_%03d.png" % i
        two = two_square_every > 0 and i % two_square_every == two_square_every - 1
        img, boxes = planted_square_image(rng, size=size, square=square, noise=noise, two_squares=two)
        imgio.write_rgb(images_dir / name, img)
        anns.append(GroundTruthAnnotation(image_id=name, class_index=1, boxes=boxes))
        files.append(images_dir / name)
    annotations = root / "annotations.txt"
    save_annotations(anns, annotations)
    return FixturePaths(
        root=root,
        manifest=manifest,
        weights=weights,
        images_dir=images_dir,
        annotations=annotations,
        image_files=files,
    )
