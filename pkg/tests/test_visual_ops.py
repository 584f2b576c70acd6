from __future__ import annotations

import numpy as np
import pytest

from visor.errors import InvalidOpError
from visor.visual.ops import Crop, Resize, Threshold, apply_ops, crop, resize, threshold

from .oracles import crop_oracle, resize_oracle, threshold_oracle


class TestThreshold:
    def test_definition(self):
        pixels = np.array([[10, 100, 200, 255]], np.uint8)
        assert threshold(pixels, 150).tolist() == [[0, 0, 200, 255]]

    def test_zero_is_identity(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (16, 16)).astype(np.uint8)
        assert np.array_equal(threshold(img, 0), img)

    def test_255_keeps_only_255(self):
        img = np.array([[254, 255, 0]], np.uint8)
        assert threshold(img, 255).tolist() == [[0, 255, 0]]

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        for t in (0, 1, 77, 128, 254, 255):
            img = rng.integers(0, 256, (16, 16)).astype(np.uint8)
            once = threshold(img, t)
            assert np.array_equal(threshold(once, t), once)

    def test_matches_oracle(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, (9, 13)).astype(np.uint8)
        assert np.array_equal(threshold(img, 97), threshold_oracle(img, 97))

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidOpError):
            threshold(np.zeros((2, 2), np.uint8), 256)

    def test_input_unmodified(self):
        img = np.full((4, 4), 10, np.uint8)
        threshold(img, 200)
        assert img.min() == 10


class TestResize:
    def test_constant_preserved_box(self):
        img = np.full((4, 4), 128, np.uint8)
        out = resize(img, 2, 2)
        assert out.shape == (2, 2) and np.all(out == 128)

    def test_identity_dimensions_bit_exact(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (7, 5)).astype(np.uint8)
        assert np.array_equal(resize(img, 5, 7), img)

    def test_checker_to_single_pixel_rounds_half_even(self):
        img = np.array([[0, 255], [0, 255]], np.uint8)
        assert resize(img, 1, 1).tolist() == [[128]]

    def test_constant_preserved_bilinear(self):
        for value in (0, 1, 85, 128, 200, 255):
            img = np.full((5, 7), value, np.uint8)
            for tw, th in ((3, 3), (11, 2), (1, 9), (13, 13)):
                out = resize(img, tw, th)
                assert out.shape == (th, tw)
                assert np.all(out == value), (value, tw, th)

    def test_matches_scalar_oracle_box(self):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, (12, 8)).astype(np.uint8)
        assert np.array_equal(resize(img, 4, 3), resize_oracle(img, 4, 3))

    def test_matches_scalar_oracle_bilinear(self):
        rng = np.random.default_rng(5)
        for shape, target in (((7, 11), (5, 4)), ((9, 4), (13, 6)), ((3, 3), (8, 2))):
            img = rng.integers(0, 256, shape).astype(np.uint8)
            got = resize(img, *target)
            want = resize_oracle(img, *target)
            assert np.array_equal(got, want), (shape, target)

    def test_matches_oracle_rgb(self):
        rng = np.random.default_rng(6)
        img = rng.integers(0, 256, (6, 10, 3)).astype(np.uint8)
        assert np.array_equal(resize(img, 4, 4), resize_oracle(img, 4, 4))
        assert np.array_equal(resize(img, 7, 9), resize_oracle(img, 7, 9))

    def test_dimension_postcondition_random_params(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            th, tw = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            img = rng.integers(0, 256, (h, w)).astype(np.uint8)
            assert resize(img, tw, th).shape == (th, tw)

    def test_rejects_zero_target(self):
        with pytest.raises(InvalidOpError):
            resize(np.zeros((4, 4), np.uint8), 0, 2)


class TestCrop:
    def test_full_frame_identity(self):
        rng = np.random.default_rng(8)
        img = rng.integers(0, 256, (6, 9)).astype(np.uint8)
        assert np.array_equal(crop(img, 0, 0, 9, 6), img)

    def test_single_pixel(self):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        assert crop(img, 0, 0, 1, 1).tolist() == [[0]]
        assert crop(img, 3, 2, 1, 1).tolist() == [[11]]

    def test_matches_oracle(self):
        rng = np.random.default_rng(9)
        img = rng.integers(0, 256, (15, 11)).astype(np.uint8)
        assert np.array_equal(crop(img, 2, 4, 7, 9), crop_oracle(img, 2, 4, 7, 9))

    def test_out_of_bounds(self):
        img = np.zeros((4, 4), np.uint8)
        for rect in ((3, 0, 2, 1), (0, 3, 1, 2), (-1, 0, 2, 2), (0, 0, 0, 1)):
            with pytest.raises(InvalidOpError):
                crop(img, *rect)


class TestPipelines:
    def test_order_sensitivity_threshold_resize(self):
        # 104|120 share a box block and straddle threshold 112:
        # threshold-then-average gives 60, average-then-threshold gives 112.
        gradient = np.tile(np.arange(8, 256, 16, dtype=np.uint8), (16, 1))
        a = apply_ops(gradient, [Threshold(112), Resize(8, 8)])
        b = apply_ops(gradient, [Resize(8, 8), Threshold(112)])
        assert a.shape == b.shape == (8, 8)
        assert not np.array_equal(a, b)
        assert a[0][3] == 60 and b[0][3] == 112
        # regression-lock both orders against the scalar oracle
        assert np.array_equal(a, resize_oracle(threshold_oracle(gradient, 112), 8, 8))
        assert np.array_equal(b, threshold_oracle(resize_oracle(gradient, 8, 8), 112))

    def test_each_op_validated_against_previous_output(self):
        img = np.zeros((8, 8), np.uint8)
        apply_ops(img, [Crop(0, 0, 4, 4), Crop(0, 0, 4, 4)])
        with pytest.raises(InvalidOpError):
            apply_ops(img, [Resize(4, 4), Crop(0, 0, 8, 8)])
