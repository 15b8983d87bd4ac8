"""Evaluation battery: localization metrics against ground-truth boxes,
confidence drop/increase under masking, and the dataset benchmark that
also aggregates per-phase timings and per-layer selection counts.

Boxes are (x_min, y_min, x_max, y_max) in pixel coordinates, half-open
on the max edges; an annotation may carry several boxes of one class
and metrics use their union.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from math import fsum

import numpy as np

from .aggregate import ExplanationMap, explain, resolve_workers
from .errors import AnnotationError, BenchmarkError, UndefinedDropError
from .imgio import read_image
from .numcore import hadamard

log = logging.getLogger("adasise")

RECORDS_SCHEMA = "adasise-records v1"
SUMMARY_SCHEMA = "adasise-summary v1"
ANNOTATIONS_SCHEMA = "adasise-annotations v1"

# wall-clock columns, excluded from golden comparisons
TIMING_FIELDS = ("extract_s", "select_s", "score_s", "fuse_s")


@dataclass
class GroundTruthAnnotation:
    image_id: str
    class_index: int
    boxes: list  # [(x_min, y_min, x_max, y_max), ...]


@dataclass
class BenchmarkRecord:
    image_id: str
    method: str
    class_index: int
    ebpg: float
    bbox: float
    drop: float | None  # None when the clean confidence was zero
    increased: bool
    num_forwards: int
    timings: object  # PhaseTimings
    layers: list  # LayerSummary per pooling layer


def load_annotations(path) -> list:
    anns = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if len(tok) < 6 or (len(tok) - 2) % 4:
                raise AnnotationError(
                    "%s:%d: expected 'file class x0 y0 x1 y1 [x0 y0 x1 y1 ...]'"
                    % (path, lineno)
                )
            try:
                cls = int(tok[1])
                nums = [int(t) for t in tok[2:]]
            except ValueError as exc:
                raise AnnotationError("%s:%d: %s" % (path, lineno, exc)) from exc
            boxes = [tuple(nums[i : i + 4]) for i in range(0, len(nums), 4)]
            for x0, y0, x1, y1 in boxes:
                if not (x0 < x1 and y0 < y1) or min(x0, y0) < 0:
                    raise AnnotationError(
                        "%s:%d: degenerate box (%d, %d, %d, %d)" % (path, lineno, x0, y0, x1, y1)
                    )
            anns.append(GroundTruthAnnotation(image_id=tok[0], class_index=cls, boxes=boxes))
    return anns


def save_annotations(anns, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# %s\n" % ANNOTATIONS_SCHEMA)
        for a in anns:
            flat = " ".join("%d %d %d %d" % b for b in a.boxes)
            fh.write("%s %d %s\n" % (a.image_id, a.class_index, flat))


def box_union_mask(shape_hw, boxes) -> np.ndarray:
    h, w = shape_hw
    mask = np.zeros((h, w), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        if x1 > w or y1 > h:
            raise AnnotationError(
                "box (%d, %d, %d, %d) exceeds the %dx%d image" % (x0, y0, x1, y1, w, h)
            )
        mask[y0:y1, x0:x1] = True
    return mask


def _as_map(saliency):
    m = saliency.map if isinstance(saliency, ExplanationMap) else np.asarray(saliency)
    return m.astype(np.float64, copy=False)


def ebpg(saliency, boxes) -> float:
    """Percentage of the map's total energy inside the box union; an
    all-zero map scores 0 (a vacuous explanation, not an error).

    Sums use exactly-rounded accumulation (fsum), so the result is
    independent of traversal order and reproducible by any naive
    recomputation."""
    m = _as_map(saliency)
    total = fsum(m.ravel())
    if total <= 0.0:
        return 0.0
    inside = fsum(m[box_union_mask(m.shape, boxes)])
    return 100.0 * inside / total


def bbox_metric(saliency, boxes) -> float:
    """Take the k most salient pixels, k being the union's pixel area,
    and return the percentage landing inside the union. Equal values
    rank in row-major order, which keeps quantized maps deterministic."""
    m = _as_map(saliency)
    union = box_union_mask(m.shape, boxes)
    k = int(union.sum())
    order = np.argsort(-m.ravel(), kind="stable")
    inside = union.ravel()[order[:k]].sum()
    return 100.0 * float(inside) / k


def drop_increase(model, image, class_index, saliency):
    """Confidence drop (percent, clamped at 0) and whether masking the
    input by its explanation raised the confidence."""
    m = saliency.map if isinstance(saliency, ExplanationMap) else np.asarray(saliency)
    y0 = model.forward_score(image, class_index)
    y1 = model.forward_score(hadamard(np.asarray(image, dtype=model.dtype), m), class_index)
    if y0 == 0.0:
        raise UndefinedDropError("clean confidence is zero; drop rate undefined")
    drop = 100.0 * max(0.0, y0 - y1) / y0
    return drop, y1 > y0


def run_benchmark(model, dataset_dir, annotations, policies, workers=None, otsu_bins=256):
    """Explain every annotated image under every policy and measure it.

    `annotations` is a path or a pre-parsed list; `policies` is an
    ordered mapping of method tag to selection policy. Returns
    (records, aggregates) with records sorted by (image_id, method).
    Images without an annotation are skipped with a warning; an
    unreadable image aborts with an error naming the file.
    """
    from pathlib import Path

    workers = resolve_workers(workers)
    if not isinstance(annotations, (list, tuple)):
        annotations = load_annotations(annotations)
    by_id = {a.image_id: a for a in annotations}

    dataset_dir = Path(dataset_dir)
    records = []
    for img_path in sorted(dataset_dir.iterdir()):
        if not img_path.is_file():
            continue
        ann = by_id.get(img_path.name)
        if ann is None:
            log.warning("no annotation for %s; skipped", img_path.name)
            continue
        try:
            image = read_image(img_path, dtype=model.dtype)
        except Exception as exc:
            raise BenchmarkError("unreadable image %s: %s" % (img_path, exc)) from exc
        for tag, policy in policies.items():
            em = explain(model, image, ann.class_index, policy, workers=workers, otsu_bins=otsu_bins)
            try:
                drop, increased = drop_increase(model, image, ann.class_index, em)
            except UndefinedDropError:
                log.warning("%s/%s: clean confidence is zero; drop excluded", img_path.name, tag)
                drop, increased = None, False
            records.append(
                BenchmarkRecord(
                    image_id=img_path.name,
                    method=tag,
                    class_index=ann.class_index,
                    ebpg=ebpg(em, ann.boxes),
                    bbox=bbox_metric(em, ann.boxes),
                    drop=drop,
                    increased=increased,
                    num_forwards=em.num_forwards,
                    timings=em.timings,
                    layers=em.layers,
                )
            )
    records.sort(key=lambda r: (r.image_id, r.method))
    return records, aggregate_records(records)


def _mean(values):
    values = list(values)
    return fsum(values) / len(values)


def aggregate_records(records):
    """Per-method means; exactly-rounded sums make every aggregate
    reproducible from the records regardless of accumulation order."""
    out = {}
    for method in sorted({r.method for r in records}):
        rows = [r for r in records if r.method == method]
        drops = [r.drop for r in rows if r.drop is not None]
        n_layers = len(rows[0].layers)
        out[method] = {
            "images": len(rows),
            "ebpg_mean": _mean(r.ebpg for r in rows),
            "bbox_mean": _mean(r.bbox for r in rows),
            "drop_mean": _mean(drops) if drops else None,
            "increase_pct": 100.0 * _mean(float(r.increased) for r in rows),
            "forwards_mean": _mean(r.num_forwards for r in rows),
            "extract_s_mean": _mean(r.timings.extract for r in rows),
            "select_s_mean": _mean(r.timings.select for r in rows),
            "score_s_mean": _mean(r.timings.score for r in rows),
            "fuse_s_mean": _mean(r.timings.fuse for r in rows),
            "total_s_mean": _mean(r.timings.total for r in rows),
            "kept_mean": [
                _mean(r.layers[p].kept_count for r in rows) for p in range(n_layers)
            ],
        }
    return out


def records_header(num_layers):
    head = [
        "image_id",
        "method",
        "class",
        "ebpg",
        "bbox",
        "drop_pct",
        "increased",
        "num_forwards",
        *TIMING_FIELDS,
    ]
    for p in range(1, num_layers + 1):
        head += ["positives_p%d" % p, "kept_p%d" % p, "mu_p%d" % p]
    return head


def write_records_csv(records, path):
    if not records:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("# %s\n" % RECORDS_SCHEMA)
        return
    num_layers = len(records[0].layers)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# %s\n" % RECORDS_SCHEMA)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(records_header(num_layers))
        for r in records:
            row = [
                r.image_id,
                r.method,
                r.class_index,
                repr(r.ebpg),
                repr(r.bbox),
                "" if r.drop is None else repr(r.drop),
                int(r.increased),
                r.num_forwards,
                "%.6f" % r.timings.extract,
                "%.6f" % r.timings.select,
                "%.6f" % r.timings.score,
                "%.6f" % r.timings.fuse,
            ]
            for layer in r.layers:
                row += [layer.positive_count, layer.kept_count, repr(layer.mu_used)]
            writer.writerow(row)


def write_summary(aggregates, path):
    lines = ["# %s" % SUMMARY_SCHEMA]
    if not aggregates:
        lines.append("images 0")
        lines.append("aggregates absent")
    for method, agg in aggregates.items():
        lines.append("method %s" % method)
        for key in (
            "images",
            "ebpg_mean",
            "bbox_mean",
            "drop_mean",
            "increase_pct",
            "forwards_mean",
            "extract_s_mean",
            "select_s_mean",
            "score_s_mean",
            "fuse_s_mean",
            "total_s_mean",
        ):
            val = agg[key]
            if val is None:
                lines.append("%s.%s absent" % (method, key))
            elif isinstance(val, float):
                lines.append("%s.%s %.6f" % (method, key, val))
            else:
                lines.append("%s.%s %d" % (method, key, val))
        for p, kept in enumerate(agg["kept_mean"], 1):
            lines.append("%s.kept_p%d_mean %.4f" % (method, p, kept))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
