"""Command-line surface: explain single images, benchmark datasets, and
inspect gradient histograms and selection counts.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 model error.
Outputs are deterministic for a fixed config and seed (timing fields
excluded), independent of the worker count.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, evaluation, imgio
from .aggregate import explain, method_tag, policy_label, resolve_workers
from .errors import AdasiseError, ModelError, ShapeMismatchError, UsageError
from .extract import extract_all, gradient_histogram
from .modelio import load_model
from .selection import (
    AdaptiveOtsu,
    FixedThreshold,
    build_positive_set,
    select_and_postprocess,
)

HIST_SCHEMA = "adasise-hist v1"
COUNTS_SCHEMA = "adasise-counts v1"
REPORT_SCHEMA = "adasise-report v1"

_PRECISIONS = {"f32": np.float32, "f64": np.float64}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    p.add_argument("--model", required=True, help="model manifest path")
    p.add_argument("--weights", required=True, help="weight container path")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--precision", choices=sorted(_PRECISIONS), default="f32")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel masked forwards (default: ADASISE_WORKERS or CPU count)")
    p.add_argument("--seed", type=int, default=0, help="recorded in reports; the pipeline itself is deterministic")


def build_parser():
    parser = _Parser(prog="adasise", description=__doc__)
    parser.add_argument("--version", action="version", version="adasise %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("explain", help="explanation map for one image")
    _add_common(pe)
    pe.add_argument("--image", required=True)
    pe.add_argument("--class", dest="class_spec", default="argmax",
                    help="target class index, or 'argmax' for the top prediction")
    pe.add_argument("--method", choices=("sise", "ada-sise"), default="ada-sise")
    pe.add_argument("--mu", type=float, default=None,
                    help="fixed selection threshold (sise only; default 0)")

    pb = sub.add_parser("benchmark", help="run the metric battery over a dataset")
    _add_common(pb)
    pb.add_argument("--dataset", required=True, help="directory of images")
    pb.add_argument("--annotations", required=True)
    pb.add_argument("--method", choices=("sise", "ada-sise"), action="append", default=None,
                    help="repeatable; default: both")
    pb.add_argument("--mu", type=float, default=None)

    pi = sub.add_parser("inspect", help="gradient histograms and selection counts")
    _add_common(pi)
    pi.add_argument("--image", required=True)
    pi.add_argument("--class", dest="class_spec", default="argmax")
    pi.add_argument("--bins", type=int, default=32, help="histogram bins")

    return parser


def _make_policy(method, mu):
    if method == "sise":
        return FixedThreshold(0.0 if mu is None else mu)
    return AdaptiveOtsu()


def _validate(args):
    if getattr(args, "mu", None) is not None:
        methods = args.method if isinstance(args.method, list) else [args.method]
        methods = methods or ["sise", "ada-sise"]
        if "sise" not in methods:
            raise UsageError("--mu only applies to the sise method")
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be >= 1")
    if getattr(args, "bins", 1) < 1:
        raise UsageError("--bins must be >= 1")
    if hasattr(args, "class_spec") and args.class_spec != "argmax":
        try:
            int(args.class_spec)
        except ValueError:
            raise UsageError("--class must be an integer or 'argmax'") from None


def _resolve_class(model, image, class_spec):
    if class_spec == "argmax":
        probs = model.forward_capture(image).probs
        return int(np.argmax(probs)), True
    return int(class_spec), False


def _config_lines(args, model):
    lines = [
        "command %s" % args.command,
        "model %s" % args.model,
        "weights %s" % args.weights,
        "precision %s" % args.precision,
        "seed %d" % args.seed,
        "pooling_layers %d" % model.num_pooling,
    ]
    return lines


def cmd_explain(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(args.model, args.weights, dtype=_PRECISIONS[args.precision])
    image = imgio.read_image(args.image, dtype=model.dtype)
    class_index, from_argmax = _resolve_class(model, image, args.class_spec)
    policy = _make_policy(args.method, args.mu)
    workers = resolve_workers(args.workers)

    em = explain(model, image, class_index, policy, workers=workers)

    tag = em.method
    imgio.write_grayscale(out_dir / ("heatmap_%s.png" % tag), em.map)
    imgio.write_overlay(out_dir / ("overlay_%s.png" % tag), image, em.map)

    lines = ["# %s" % REPORT_SCHEMA]
    lines += _config_lines(args, model)
    lines += [
        "image %s" % args.image,
        "method %s" % tag,
        "policy %s" % policy_label(policy),
        "class %d%s" % (class_index, " (argmax)" if from_argmax else ""),
        "confidence %.6f" % em.confidence,
        "num_forwards %d" % em.num_forwards,
    ]
    for l in em.layers:
        lines.append(
            "layer %d maps %d positives %d kept %d mu %r"
            % (l.layer_index, l.total_maps, l.positive_count, l.kept_count, l.mu_used)
        )
    lines.append("[timings]")  # everything below is wall clock, excluded from goldens
    for name, val in (
        ("extract_s", em.timings.extract),
        ("select_s", em.timings.select),
        ("score_s", em.timings.score),
        ("fuse_s", em.timings.fuse),
        ("total_s", em.timings.total),
    ):
        lines.append("%s %.6f" % (name, val))
    (out_dir / ("report_%s.txt" % tag)).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_benchmark(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(args.model, args.weights, dtype=_PRECISIONS[args.precision])
    methods = args.method or ["sise", "ada-sise"]
    policies = {m: _make_policy(m, args.mu) for m in dict.fromkeys(methods)}
    records, aggregates = evaluation.run_benchmark(
        model, args.dataset, args.annotations, policies, workers=args.workers
    )
    evaluation.write_records_csv(records, out_dir / "records.csv")
    evaluation.write_summary(aggregates, out_dir / "summary.txt")
    return 0


def cmd_inspect(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(args.model, args.weights, dtype=_PRECISIONS[args.precision])
    image = imgio.read_image(args.image, dtype=model.dtype)
    class_index, _ = _resolve_class(model, image, args.class_spec)

    reports = extract_all(model, image, class_index)
    h, w = model.input_shape[:2]
    rows = []
    for rep in reports:
        hist = gradient_histogram(rep, bins=args.bins)
        with open(out_dir / ("hist_p%d.csv" % rep.layer_index), "w", encoding="utf-8", newline="") as fh:
            fh.write("# %s\n" % HIST_SCHEMA)
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_left", "count"])
            for edge, count in hist:
                writer.writerow([repr(edge), count])
        pset = build_positive_set(rep)
        sise_set = select_and_postprocess(rep, FixedThreshold(0.0), h, w)
        ada_set = select_and_postprocess(rep, AdaptiveOtsu(), h, w)
        rows.append(
            [
                rep.layer_index,
                rep.num_maps,
                len(pset),
                sise_set.kept_count,
                ada_set.kept_count,
                repr(ada_set.mu_used),
            ]
        )
    with open(out_dir / "selection_counts.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("# %s\n" % COUNTS_SCHEMA)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "maps_available", "positives", "sise_kept", "adasise_kept", "adasise_mu"])
        writer.writerows(rows)
    return 0


_COMMANDS = {"explain": cmd_explain, "benchmark": cmd_benchmark, "inspect": cmd_inspect}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ModelError, ShapeMismatchError) as exc:
        print("model error: %s" % exc, file=sys.stderr)
        return 3
    except (AdasiseError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
