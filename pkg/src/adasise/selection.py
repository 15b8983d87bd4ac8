"""Phase 2: feature-map selection and post-processing.

Two policies exist. The baseline keeps every map whose normalized
gradient score exceeds a fixed threshold (0 by default). The adaptive
policy derives the threshold per layer with an Otsu-style search over
the sorted positive scores: for each interior split index i it forms
low/high class means

    w_lo(i) = (sum of the first i values) / i * n
    w_hi(i) = (sum of values i..n)        / (n - i) * n

whose product, damped by ((n - 2i) / n)^2, is the between-class
variance tau(i); the threshold is the value at the argmax split. Note
the high sum deliberately starts at i, overlapping the low sum, and
n - i undercounts that range by one; ``exclusive_high=True`` switches
to the disjoint i+1..n reading. Survivors are resized to the input
grid and normalized into attribution masks.

The argmax is decided in exact integer arithmetic (scores are dyadic
rationals, so prefix sums and cross-multiplied comparisons are exact).
This makes the search agree with a brute-force scan for every input,
including ties, which fall to the smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extract import LayerGradientReport
from .numcore import bilinear_resize, minmax_normalize

# Any finite double scaled by 2**1100 is an integer (subnormal spacing
# is 2**-1074), so this lossless scale covers every representable score.
_SCALE_BITS = 1100


@dataclass(frozen=True)
class FixedThreshold:
    """Keep maps with normalized score strictly above a fixed cutoff."""

    mu: float = 0.0


@dataclass(frozen=True)
class AdaptiveOtsu:
    """Derive the cutoff per layer from the positive-score distribution."""

    exclusive_high: bool = False


@dataclass
class PositiveGradientSet:
    """Positive normalized scores, ascending, with their map indices."""

    values: np.ndarray  # float64, ascending, in (0, 1]
    origins: np.ndarray  # map index per value

    def __len__(self):
        return int(self.values.size)


@dataclass
class AttributionMaskSet:
    layer_index: int
    masks: np.ndarray  # (K, H, W), each in [0, 1]
    kept_indices: np.ndarray  # ascending map indices
    mu_used: float
    total_maps: int
    positive_count: int

    @property
    def kept_count(self) -> int:
        return int(self.kept_indices.size)


def build_positive_set(report: LayerGradientReport) -> PositiveGradientSet:
    if report.upsilon is None:
        return PositiveGradientSet(
            values=np.empty(0, dtype=np.float64), origins=np.empty(0, dtype=np.int64)
        )
    mask = report.upsilon > 0.0
    origins = np.nonzero(mask)[0]
    values = report.upsilon[mask]
    order = np.argsort(values, kind="stable")  # ties stay in map order
    return PositiveGradientSet(values=values[order], origins=origins[order])


def _check_split(pset, i):
    n = len(pset)
    if not 1 <= i <= n - 1:
        raise ValueError("split index %d outside [1, %d]" % (i, n - 1))


def class_means(pset: PositiveGradientSet, i: int, exclusive_high: bool = False):
    """Low/high class means (w_lo, w_hi) for the 1-based split index i."""
    _check_split(pset, i)
    n = len(pset)
    v = pset.values
    w_lo = v[:i].sum() / i * n
    hi = v[i:] if exclusive_high else v[i - 1 :]
    w_hi = hi.sum() / (n - i) * n
    return float(w_lo), float(w_hi)


def inter_class_variance(pset: PositiveGradientSet, i: int, exclusive_high: bool = False) -> float:
    w_lo, w_hi = class_means(pset, i, exclusive_high)
    n = len(pset)
    return w_lo * w_hi * ((n - 2 * i) / n) ** 2


def _exact_scaled(values):
    out = []
    for v in values:
        num, den = float(v).as_integer_ratio()
        out.append((num << _SCALE_BITS) // den)  # den is a power of two: exact
    return out


def adaptive_split(pset: PositiveGradientSet, exclusive_high: bool = False):
    """1-based argmax split index of the between-class variance, or None
    when the set is degenerate: fewer than two scores, or every score
    equal. Either way there are no separable clusters and the caller
    keeps all positive maps.

    tau(i) compares as s_lo * s_hi * (n - 2i)^2 / (i * (n - i)); the
    common n^2 factor cancels. Evaluated exactly on integer-scaled
    scores; ties break to the smallest index.
    """
    n = len(pset)
    if n <= 1 or pset.values[0] == pset.values[-1]:
        return None
    ints = _exact_scaled(pset.values)
    prefix = [0]
    for v in ints:
        prefix.append(prefix[-1] + v)
    total = prefix[n]
    best_i = None
    best_num = best_den = 0
    for i in range(1, n):
        s_lo = prefix[i]
        s_hi = total - (prefix[i] if exclusive_high else prefix[i - 1])
        num = s_lo * s_hi * (n - 2 * i) ** 2
        den = i * (n - i)
        if best_i is None or num * best_den > best_num * den:
            best_i, best_num, best_den = i, num, den
    return best_i


def adaptive_mu(pset: PositiveGradientSet, exclusive_high: bool = False) -> float:
    """The adaptive threshold: the score at the argmax split, or 0 when
    the set has at most one element (keep every positive map)."""
    i = adaptive_split(pset, exclusive_high)
    if i is None:
        return 0.0
    return float(pset.values[i - 1])


def resolve_mu(report: LayerGradientReport, policy) -> float:
    if isinstance(policy, FixedThreshold):
        return float(policy.mu)
    if isinstance(policy, AdaptiveOtsu):
        return adaptive_mu(build_positive_set(report), policy.exclusive_high)
    raise TypeError("unknown selection policy %r" % (policy,))


def select_and_postprocess(
    report: LayerGradientReport, policy, out_h: int, out_w: int
) -> AttributionMaskSet:
    """Keep maps scoring strictly above the policy threshold and convert
    them to input-sized attribution masks (bilinear resize, then min-max
    normalization). A layer without positive scores keeps nothing."""
    mu = resolve_mu(report, policy)
    positive_count = int((report.upsilon > 0.0).sum()) if report.upsilon is not None else 0
    if report.upsilon is None:
        kept = np.empty(0, dtype=np.int64)
    else:
        kept = np.nonzero(report.upsilon > mu)[0]
    dtype = report.feature_maps.dtype
    masks = np.empty((kept.size, out_h, out_w), dtype=dtype)
    for row, k in enumerate(kept):
        masks[row] = minmax_normalize(bilinear_resize(report.feature_maps[k], out_h, out_w))
    return AttributionMaskSet(
        layer_index=report.layer_index,
        masks=masks,
        kept_indices=kept,
        mu_used=mu,
        total_maps=report.num_maps,
        positive_count=positive_count,
    )
