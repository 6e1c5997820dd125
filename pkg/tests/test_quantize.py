import numpy as np
import pytest

from oracles import naive_patch_histograms
from qfca.quantize import (REFERENCE_MODES, bin_indices, fit_quantizer,
                           patch_histograms, select_reference)


def fmap(arr):
    return np.asarray(arr, dtype=np.float32)


def test_fit_quantizer_centers():
    v = fmap(np.arange(5).reshape(1, 1, 5))
    q = fit_quantizer(v, 4)
    np.testing.assert_allclose(q.centers(0), [0.5, 1.5, 2.5, 3.5])


def test_fit_quantizer_degenerate_flag():
    q = fit_quantizer(fmap(np.full((1, 3, 3), 2.0)), 8)
    assert q.degenerate[0]


def test_bin_indices_floor_rule():
    v = fmap(np.array([[[0.0, 2.0, 4.0]]]))
    q = fit_quantizer(v, 4)
    idx = bin_indices(v, q).indices[0, 0]
    assert idx[1] == 2


def test_bin_index_hi_maps_to_last():
    v = fmap(np.array([[[0.0, 4.0]]]))
    q = fit_quantizer(v, 4)
    assert bin_indices(v, q).indices[0, 0, 1] == 3


def test_bin_index_clamps_below_lo():
    v = fmap(np.array([[[0.0, 4.0]]]))
    q = fit_quantizer(v, 4)
    noisy = fmap(np.array([[[-1e-6, 4.0]]]))
    assert bin_indices(noisy, q).indices[0, 0, 0] == 0


def test_patch_histograms_uniform_map():
    v = fmap(np.full((1, 5, 5), 3.0))
    q = fit_quantizer(fmap(np.arange(8).reshape(1, 1, 8)), 8)
    b = bin_indices(v, q)
    b.indices[:] = 3
    hf = patch_histograms(b, 3)
    np.testing.assert_array_equal(hf.counts[0, 3], 9.0)
    assert hf.counts[0].sum() == 25 * 9


def test_patch_histograms_t1_one_hot():
    rng = np.random.default_rng(0)
    v = fmap(rng.random((2, 4, 4)))
    q = fit_quantizer(v, 5)
    b = bin_indices(v, q)
    hf = patch_histograms(b, 1)
    assert hf.counts.max() == 1.0
    np.testing.assert_array_equal(hf.counts.sum(axis=1), 1.0)


def test_patch_histograms_single_outlier():
    idx = np.ones((1, 3, 3), dtype=np.int32)
    idx[0, 1, 1] = 0
    from qfca.quantize import BinIndexMap
    hf = patch_histograms(BinIndexMap(indices=idx, n_bins=4), 3)
    np.testing.assert_array_equal(hf.counts[0, :, 1, 1], [1, 8, 0, 0])


@pytest.mark.parametrize("t", [1, 3, 5])
def test_patch_histograms_match_counting_oracle(t):
    rng = np.random.default_rng(t)
    from qfca.quantize import BinIndexMap
    idx = rng.integers(0, 6, (2, 13, 17)).astype(np.int32)
    hf = patch_histograms(BinIndexMap(indices=idx, n_bins=6), t)
    for c in range(2):
        expected = naive_patch_histograms(idx[c], 6, t)
        np.testing.assert_array_equal(hf.counts[c], expected)


def test_mass_conservation():
    rng = np.random.default_rng(5)
    from qfca.quantize import BinIndexMap
    idx = rng.integers(0, 16, (3, 20, 20)).astype(np.int32)
    hf = patch_histograms(BinIndexMap(indices=idx, n_bins=16), 9)
    sums = hf.counts.sum(axis=1)
    assert np.max(np.abs(sums - 81.0)) <= 1e-3


def test_reference_constant_map_all_modes_agree():
    v = fmap(np.full((1, 8, 8), 1.5))
    q = fit_quantizer(v, 4)
    refs = [select_reference(v, q, 3, mode=m) for m in REFERENCE_MODES]
    for ref in refs:
        assert ref.weights[0].sum() == pytest.approx(9.0, abs=1e-6)
        np.testing.assert_array_equal(ref.weights[0] > 0, [True, False, False, False])


def test_reference_median_quan_rank_median():
    # three sampled rank-vectors (1,1,3), (1,1,3), (5,5,7): elementwise
    # lower median is (1,1,3)
    ranked = np.array([[1.0, 1, 3], [5, 5, 7], [1, 1, 3]])
    from qfca.quantize import _lower_median
    np.testing.assert_array_equal(_lower_median(ranked, axis=0), [1, 1, 3])


def test_reference_identical_patches_exact():
    # vertical stripes of period 3 with wraparound: every 3x3 window holds
    # each stripe value exactly three times
    col = np.array([0.0, 1.0, 2.0])
    v = fmap(np.tile(col, (9, 3))[None])
    q = fit_quantizer(v, 3)
    ref = select_reference(v, q, 3, mode="median-quan", pad="wrap")
    np.testing.assert_allclose(ref.weights[0], [3.0, 3.0, 3.0], atol=1e-6)


def test_reference_invariance_under_affine_rescale():
    rng = np.random.default_rng(6)
    v = fmap(rng.random((2, 16, 16)))
    q1 = fit_quantizer(v, 8)
    r1 = select_reference(v, q1, 5)
    v2 = fmap(3.0 * v + 1.0)
    q2 = fit_quantizer(v2, 8)
    r2 = select_reference(v2, q2, 5)
    np.testing.assert_allclose(r1.weights, r2.weights, atol=1e-6)


def test_reference_mass_all_modes():
    rng = np.random.default_rng(7)
    v = fmap(rng.random((2, 12, 12)))
    q = fit_quantizer(v, 6)
    for m in REFERENCE_MODES:
        ref = select_reference(v, q, 5, mode=m)
        np.testing.assert_allclose(ref.weights.sum(axis=1), 25.0, atol=1e-6)


def test_unknown_mode_rejected():
    v = fmap(np.zeros((1, 4, 4)))
    q = fit_quantizer(v, 2)
    with pytest.raises(ValueError):
        select_reference(v, q, 3, mode="bogus")


def test_even_patch_rejected():
    from qfca.quantize import BinIndexMap
    b = BinIndexMap(indices=np.zeros((1, 4, 4), np.int32), n_bins=2)
    with pytest.raises(ValueError):
        patch_histograms(b, 4)
