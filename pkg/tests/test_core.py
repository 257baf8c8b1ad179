import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cdce.core import (GroundTruth, ImagePair, MotionField, as_image, block_mean, disparity_error_rate,
                       mse, psnr, upsample_cells)
from cdce.errors import ConfigError, ShapeError


def test_mse_psnr_equal_images_give_infinite_psnr(small_image):
    assert mse(small_image, small_image) == 0.0
    assert psnr(small_image, small_image) == math.inf


def test_uniform_difference_of_16():
    a = np.zeros((5, 7))
    assert mse(a, a + 16) == 256.0
    # 10 log10(255^2 / 256)
    assert psnr(a, a + 16) == pytest.approx(24.0484, abs=1e-4)


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        mse(np.zeros((2, 2)), np.zeros((2, 3)))


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_psnr_strictly_decreasing_in_mse(e1, e2):
    if e1 == e2:
        return
    a = np.zeros((1, 1))
    p1, p2 = psnr(a, a + math.sqrt(e1)), psnr(a, a + math.sqrt(e2))
    assert (p1 > p2) == (e1 < e2)


def test_as_image_rejects_bad_input():
    with pytest.raises(ShapeError):
        as_image(np.zeros(5))
    with pytest.raises(ShapeError):
        as_image(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        as_image(np.array([[1.0, np.nan]]))


class TestMotionField:
    def test_window_bounds_enforced(self):
        with pytest.raises(ConfigError):
            MotionField(np.full((2, 2), 3), np.zeros((2, 2)), (2, 2), window=(2, 0))
        with pytest.raises(ConfigError):
            MotionField(np.zeros((2, 2)), np.full((2, 2), -1), (2, 2), window=(2, 0))

    def test_non_integer_values_rejected(self):
        with pytest.raises(ConfigError):
            MotionField(np.full((2, 2), 0.5), np.zeros((2, 2)), (2, 2), window=(1, 1))

    def test_block_grid_is_ceiling(self):
        f = MotionField.zeros((10, 7), block=4)
        assert f.grid_shape == (3, 2)
        assert f.granularity == "block"
        with pytest.raises(ShapeError):
            MotionField(np.zeros((2, 2)), np.zeros((2, 2)), (10, 7), block=4)

    def test_block_pixels_share_vector(self):
        mh = np.array([[1, -2], [0, 3]])
        f = MotionField(mh, np.zeros_like(mh), (7, 6), window=(3, 0), block=4)
        px, pv = f.to_pixels()
        assert px.shape == (7, 6)
        assert np.all(px[:4, :4] == 1) and np.all(px[:4, 4:] == -2)
        assert np.all(px[4:, :4] == 0) and np.all(px[4:, 4:] == 3)
        assert not pv.any()

    def test_arrays_are_read_only(self):
        f = MotionField.zeros((3, 3), window=(1, 1))
        with pytest.raises(ValueError):
            f.mh[0, 0] = 1

    @given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 4), st.data())
    def test_upsample_then_block_mean_is_identity(self, block, g1, g2, data):
        n1 = (g1 - 1) * block + data.draw(st.integers(1, block))
        n2 = (g2 - 1) * block + data.draw(st.integers(1, block))
        cells = data.draw(arrays(np.int64, (g1, g2), elements=st.integers(-9, 9)))
        px = upsample_cells(cells, (n1, n2), block)
        assert np.array_equal(block_mean(px, block), cells)
        f = MotionField.from_pixels(px, np.zeros_like(px), (9, 0), block)
        assert np.array_equal(f.mh, cells)


class TestErrorRate:
    def test_identical_fields_score_zero(self):
        mh = np.array([[0, 1, 2], [3, 4, 5]])
        f = MotionField(mh, np.zeros_like(mh), (2, 3), window=(5, 0))
        gt = GroundTruth(mh.astype(float))
        assert disparity_error_rate(f, gt) == 0.0

    def test_threshold_is_strict_and_mask_excludes(self):
        est = MotionField(np.array([[0, 0, 0, 0]]), np.zeros((1, 4)), (1, 4), window=(3, 0))
        gt_vals = np.array([[1.0, 1.5, 3.0, 3.0]])
        unknown = np.array([[False, False, False, True]])
        gt = GroundTruth(gt_vals, None, unknown)
        # errors 1 (not bad), 1.5 (bad), 3 (bad), masked
        assert disparity_error_rate(est, gt) == pytest.approx(2 / 3)

    def test_flow_mode_counts_vertical_errors(self):
        est = MotionField(np.zeros((1, 2)), np.array([[0, 2]]), (1, 2), window=(0, 2))
        gt = GroundTruth(np.zeros((1, 2)), np.zeros((1, 2)))
        assert disparity_error_rate(est, gt, stereo=True) == 0.0
        assert disparity_error_rate(est, gt, stereo=False) == 0.5

    @given(arrays(np.int64, (4, 5), elements=st.integers(-4, 4)),
           arrays(np.int64, (4, 5), elements=st.integers(-4, 4)), st.integers(-3, 3))
    def test_in_unit_interval_and_shift_invariant(self, a, b, c):
        est = MotionField(a, np.zeros_like(a), (4, 5), window=(4, 0))
        gt = GroundTruth(b.astype(float))
        r = disparity_error_rate(est, gt)
        assert 0.0 <= r <= 1.0
        est2 = MotionField(a + c, np.zeros_like(a), (4, 5), window=(8, 0))
        assert disparity_error_rate(est2, GroundTruth((b + c).astype(float))) == r

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            disparity_error_rate(MotionField.zeros((2, 2)), GroundTruth(np.zeros((3, 3))))


class TestGroundTruth:
    def test_stored_values_are_divided_and_zero_masked(self):
        stored = np.array([[0, 8, 16], [40, 4, 0]], dtype=float)
        gt = GroundTruth.from_stored(stored, scale_divisor=8)
        assert np.allclose(gt.mh, stored / 8)
        assert gt.unknown.tolist() == [[True, False, False], [False, False, True]]

    def test_scale_divisor_at_least_one(self):
        with pytest.raises(ConfigError):
            GroundTruth(np.zeros((2, 2)), scale_divisor=0)

    def test_to_motion_field_rounds_and_clips(self):
        gt = GroundTruth(np.array([[0.4, 1.6, 30.0]]), unknown=np.array([[False, False, True]]))
        f = gt.to_motion_field((5, 0))
        assert f.mh.tolist() == [[0, 2, 0]]


def test_image_pair_validates_shapes():
    with pytest.raises(ShapeError):
        ImagePair(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        ImagePair(np.zeros((2, 2)), np.zeros((2, 2)), GroundTruth(np.zeros((3, 3))))
