import numpy as np
import pytest

from qfca.pooling import (box_average, box_average_stack, box_sum, build_sat,
                          naive_box_average)


def test_build_sat_1x1():
    sat = build_sat(np.array([[5.0]]))
    np.testing.assert_array_equal(sat.cumsum, [[0, 0], [0, 5]])


def test_build_sat_2x2_hand():
    sat = build_sat(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(
        sat.cumsum, [[0, 0, 0], [0, 1, 3], [0, 4, 10]])


def test_build_sat_zero():
    sat = build_sat(np.zeros((3, 4)))
    np.testing.assert_array_equal(sat.cumsum, np.zeros((4, 5)))


def test_box_sum_center_zero_pad():
    sat = build_sat(np.ones((3, 3)))
    assert box_sum(sat, 1, 1, 3, pad="zero") == 9.0


def test_box_sum_corner_zero_pad():
    sat = build_sat(np.ones((3, 3)))
    assert box_sum(sat, 0, 0, 3, pad="zero") == 4.0


def test_box_sum_corner_reflect():
    sat = build_sat(np.ones((3, 3)), margin=1, pad="reflect")
    assert box_sum(sat, 0, 0, 3, pad="reflect") == 9.0


def test_box_sum_even_kernel_rejected():
    sat = build_sat(np.ones((3, 3)))
    with pytest.raises(ValueError):
        box_sum(sat, 1, 1, 2)


def test_box_average_k1_identity():
    rng = np.random.default_rng(0)
    p = rng.random((7, 5))
    for pad in ("zero", "reflect"):
        np.testing.assert_allclose(box_average(p, 1, pad), p)


def test_box_average_2x2_k3_reflect_hand():
    p = np.array([[1.0, 2.0], [3.0, 4.0]])
    # hand reflect-pad (no edge repeat) to 4x4 and average each 3x3 window
    expected = np.array([[27.0, 24.0], [21.0, 18.0]]) / 9.0
    np.testing.assert_allclose(box_average(p, 3, "reflect"), expected)


@pytest.mark.parametrize("k", [3, 9, 31])
@pytest.mark.parametrize("pad", ["zero", "reflect"])
def test_box_average_matches_naive_256(k, pad):
    rng = np.random.default_rng(k)
    p = rng.random((256, 256)).astype(np.float32)
    fast = box_average(p, k, pad)
    slow = naive_box_average(p, k, pad)
    assert np.max(np.abs(fast - slow)) <= 1e-4


def test_naive_1x1_reflect_identity():
    p = np.array([[3.5]])
    for k in (1, 3, 5):
        np.testing.assert_allclose(naive_box_average(p, k, "reflect"), p)


def test_naive_all_zero():
    np.testing.assert_array_equal(
        naive_box_average(np.zeros((4, 4)), 3, "reflect"), np.zeros((4, 4)))


def test_linearity():
    rng = np.random.default_rng(1)
    x = rng.random((16, 16))
    y = rng.random((16, 16))
    a, b = 2.5, -1.25
    lhs = box_average(a * x + b * y, 5, "reflect")
    rhs = a * box_average(x, 5, "reflect") + b * box_average(y, 5, "reflect")
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@pytest.mark.parametrize("pad", ["zero", "reflect", "wrap"])
def test_stack_matches_single(pad):
    rng = np.random.default_rng(2)
    planes = rng.random((4, 12, 10)).astype(np.float32)
    stacked = box_average_stack(planes, 5, pad)
    for i in range(4):
        np.testing.assert_allclose(stacked[i], box_average(planes[i], 5, pad),
                                   atol=1e-12)


def test_wrap_padding_is_toroidal():
    rng = np.random.default_rng(3)
    p = rng.random((8, 8))
    rolled = np.roll(p, (3, 2), axis=(0, 1))
    a = box_average(p, 3, "wrap")
    b = box_average(rolled, 3, "wrap")
    np.testing.assert_allclose(np.roll(a, (3, 2), axis=(0, 1)), b, atol=1e-12)
