import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adasise.errors import ShapeMismatchError
from adasise.numcore import bilinear_resize, hadamard, minmax_normalize, otsu_binarize


def finite_floats(lo, hi):
    return st.floats(min_value=lo, max_value=hi, allow_nan=False, allow_infinity=False)


class TestBilinearResize:
    def test_identity(self):
        t = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        assert np.array_equal(bilinear_resize(t, 2, 2), t)

    def test_constant_extension_from_singleton(self):
        out = bilinear_resize(np.array([[5.0]]), 3, 4)
        assert np.array_equal(out, np.full((3, 4), 5.0))

    def test_corner_aligned_midpoint(self):
        out = bilinear_resize(np.array([[0.0, 0.0], [0.0, 1.0]]), 3, 3)
        assert out[1, 1] == 0.25

    def test_corners_preserved(self, rng):
        src = rng.random((5, 7))
        out = bilinear_resize(src, 13, 11)
        assert out[0, 0] == src[0, 0]
        assert out[0, -1] == src[0, -1]
        assert out[-1, 0] == src[-1, 0]
        assert out[-1, -1] == src[-1, -1]

    @given(
        h=st.integers(1, 6),
        w=st.integers(1, 6),
        oh=st.integers(1, 9),
        ow=st.integers(1, 9),
        seed=st.integers(0, 2**16),
    )
    @settings(max_examples=60, deadline=None)
    def test_range_and_identity_property(self, h, w, oh, ow, seed):
        src = np.random.default_rng(seed).random((h, w))
        out = bilinear_resize(src, oh, ow)
        assert out.shape == (oh, ow)
        # interpolation is a convex combination: stays within input range
        assert out.min() >= src.min() - 1e-12
        assert out.max() <= src.max() + 1e-12
        if (oh, ow) == (h, w):
            assert np.array_equal(out, src)

    def test_zero_target_rejected(self):
        with pytest.raises(ValueError):
            bilinear_resize(np.ones((2, 2)), 0, 3)

    def test_non_2d_rejected(self):
        with pytest.raises(ShapeMismatchError):
            bilinear_resize(np.ones((2, 2, 3)), 4, 4)


class TestMinmaxNormalize:
    def test_affine_rescale(self):
        assert np.allclose(minmax_normalize([2.0, 4.0, 6.0]), [0.0, 0.5, 1.0])
        assert np.allclose(minmax_normalize([-1.0, 0.0, 3.0]), [0.0, 0.25, 1.0])

    def test_constant_maps_to_zeros(self):
        assert np.array_equal(minmax_normalize(np.full((3, 3), 7.0)), np.zeros((3, 3)))

    @given(st.lists(finite_floats(-1e6, 1e6), min_size=1, max_size=64))
    @settings(max_examples=100, deadline=None)
    def test_output_range(self, values):
        out = minmax_normalize(np.array(values))
        assert np.isfinite(out).all()
        assert out.min() >= 0.0 and out.max() <= 1.0
        if max(values) > min(values):
            assert out.min() == 0.0 and out.max() == 1.0


class TestHadamard:
    def test_identity_and_annihilator(self, rng):
        a = rng.random((4, 5))
        assert np.array_equal(hadamard(a, np.ones_like(a)), a)
        assert np.array_equal(hadamard(a, np.zeros_like(a)), np.zeros_like(a))

    def test_direct_product(self):
        out = hadamard([[1.0, 2.0], [3.0, 4.0]], [[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(out, [[0.0, 2.0], [3.0, 0.0]])

    def test_channel_broadcast(self, rng):
        img = rng.random((4, 4, 3))
        mask = rng.random((4, 4))
        out = hadamard(img, mask)
        assert out.shape == img.shape
        assert np.array_equal(out[:, :, 1], img[:, :, 1] * mask)

    def test_commutative_for_equal_shapes(self, rng):
        a, b = rng.random((3, 3)), rng.random((3, 3))
        assert np.array_equal(hadamard(a, b), hadamard(b, a))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            hadamard(np.ones((2, 2)), np.ones((3, 2)))
        with pytest.raises(ShapeMismatchError):
            hadamard(np.ones((2, 2)), np.ones((2, 2, 3)))


def otsu_partition_oracle(values, bins):
    """Exhaustive search over every bin threshold, straight from the
    definition: split the binned values at each edge, compare the
    between-class variances, return the winning binary partition."""
    flat = [min(int(v * bins), bins - 1) for v in values.ravel().tolist()]
    centers = [(b + 0.5) / bins for b in range(bins)]
    best_t, best_v = None, -1.0
    for t in range(bins - 1):
        lo = [centers[b] for b in flat if b <= t]
        hi = [centers[b] for b in flat if b > t]
        if not lo or not hi:
            continue
        v = len(lo) * len(hi) * (sum(lo) / len(lo) - sum(hi) / len(hi)) ** 2
        if v > best_v:
            best_t, best_v = t, v
    assert best_t is not None
    theta = (best_t + 1) / bins
    return values > theta


class TestOtsuBinarize:
    def test_constant_map_all_ones(self):
        out = otsu_binarize(np.full((3, 3), 0.5))
        assert np.array_equal(out, np.ones((3, 3)))

    def test_perfectly_bimodal(self):
        m = np.zeros((4, 4))
        m[:2] = 1.0
        assert np.array_equal(otsu_binarize(m), m)

    def test_random_bimodal_matches_exhaustive_search(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            lo = rng.normal(0.2, 0.1, 60)
            hi = rng.normal(0.8, 0.1, 40)
            m = np.clip(np.concatenate([lo, hi]), 0.0, 1.0).reshape(10, 10)
            got = otsu_binarize(m).astype(bool)
            assert np.array_equal(got, otsu_partition_oracle(m, 256))

    @given(seed=st.integers(0, 2**16), bins=st.sampled_from([16, 64, 256]))
    @settings(max_examples=40, deadline=None)
    def test_matches_exhaustive_search_property(self, seed, bins):
        m = np.random.default_rng(seed).random((6, 6))
        assert np.array_equal(otsu_binarize(m, bins=bins).astype(bool), otsu_partition_oracle(m, bins))

    def test_invariant_under_increasing_affine_rescale(self):
        # values at bin centers so renormalization rounding cannot move bins
        rng = np.random.default_rng(9)
        for a, b in ((2.0, 0.5), (0.25, -3.0), (10.0, 7.0)):
            centers = (rng.integers(0, 256, (8, 8)) + 0.5) / 256.0
            centers[0, 0], centers[-1, -1] = 0.0, 1.0  # pin the extremes
            base = otsu_binarize(centers)
            rescaled = otsu_binarize(minmax_normalize(a * centers + b))
            assert np.array_equal(base, rescaled)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            otsu_binarize(np.array([[0.2, 1.5]]))

    def test_rejects_bad_bins(self):
        with pytest.raises(ValueError):
            otsu_binarize(np.zeros((2, 2)), bins=1)
