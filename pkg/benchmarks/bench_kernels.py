#!/usr/bin/env python3
"""Timing comparison of the compiled kernel core against the NumPy fallback.

Times the individual hot kernels on pipeline-representative shapes,
then a full explanation run per selection policy on the planted-square
fixture model. Prints one table; the speedup column is compiled over
fallback (values > 1 favor the compiled core).
"""

import argparse
import time

import numpy as np

from adasise import backend, synth
from adasise.aggregate import explain
from adasise.selection import AdaptiveOtsu, FixedThreshold


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng, dtype):
    cases = []
    for h, ci, co in ((32, 3, 8), (16, 8, 8), (8, 8, 256)):
        x = rng.random((h, h, ci)).astype(dtype)
        w = rng.normal(0, 0.3, (3, 3, ci, co)).astype(dtype)
        b = np.zeros(co, dtype=dtype)
        dy = rng.normal(0, 1, (h, h, co)).astype(dtype)
        cases.append(("conv %dx%dx%d->%d" % (h, h, ci, co), lambda x=x, w=w, b=b: backend.conv2d_forward(x, w, b)))
        cases.append(("conv_grad %dx%dx%d<-%d" % (h, h, ci, co), lambda dy=dy, w=w: backend.conv2d_input_grad(dy, w)))
    big = rng.random((32, 32, 64)).astype(dtype)
    cases.append(("maxpool 32x32x64", lambda: backend.maxpool2_forward(big)))
    cases.append(("avgpool 32x32x64", lambda: backend.avgpool2_forward(big)))
    small = rng.random((4, 4)).astype(dtype)
    cases.append(("bilinear 4x4->32x32", lambda: backend.bilinear_resize2d(small, 32, 32)))
    return cases


def pipeline_cases(seed, dtype):
    model = synth.planted_square_model()
    if dtype is np.float64:
        model = model.astype(np.float64)
    rng = np.random.default_rng(seed)
    img, _ = synth.planted_square_image(rng, size=model.input_shape[0], square=14)
    img = img.astype(model.dtype)
    return [
        ("explain sise (208 fwd)", lambda: explain(model, img, 1, FixedThreshold(0.0), workers=1)),
        ("explain ada-sise", lambda: explain(model, img, 1, AdaptiveOtsu(), workers=1)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5, help="best-of repetitions per case")
    ap.add_argument("--f64", action="store_true", help="time the float64 mode instead of float32")
    args = ap.parse_args()

    names = backend.available_backends()
    if "cython" not in names:
        print("compiled extension not built; only the fallback is available")
    dtype = np.float64 if args.f64 else np.float32
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng, dtype) + pipeline_cases(0, dtype)

    results = {}
    for name in names:
        backend.set_backend(name)
        for label, fn in cases:
            fn()  # warm up
            results[(label, name)] = best_of(fn, args.repeat)

    width = max(len(label) for label, _ in cases)
    header = "%-*s" % (width, "case")
    for name in names:
        header += "  %12s" % name
    if len(names) == 2:
        header += "  %8s" % "speedup"
    print(header)
    for label, _ in cases:
        row = "%-*s" % (width, label)
        for name in names:
            row += "  %10.3f ms" % (1e3 * results[(label, name)])
        if len(names) == 2:
            row += "  %7.2fx" % (results[(label, "numpy")] / results[(label, "cython")])
        print(row)


if __name__ == "__main__":
    main()
