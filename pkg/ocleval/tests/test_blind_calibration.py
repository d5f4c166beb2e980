#!/usr/bin/env python3
"""
Unit tests for the blind classifier, context-window search and shift calibration.
"""

import unittest

import numpy as np

from ocleval.blind_calibration import (
    BlindConfig,
    blind_accuracy,
    blind_predict,
    blind_predictions,
    calibrate_shift,
    default_shift_grid,
    search_k,
)
from ocleval.errors import ConfigError, EmptyHistoryError, StepRangeError
from ocleval.synthetic_stream import generate, make_spec

PREDICT_CASES = {
    "single_label": {"history": [2, 2, 2], "k": 1, "expected": 2},
    "window_mode": {"history": [1, 2, 2, 3], "k": 3, "expected": 2},
    "tie_goes_to_most_recent": {"history": [1, 2], "k": 2, "expected": 2},
    "short_history": {"history": [4], "k": 8, "expected": 4},
    "older_tie": {"history": [5, 7, 7, 5, 9], "k": 5, "expected": 5},
}


class BlindPredictTests(unittest.TestCase):
    """Tests for blind_predict and its one-pass vectorized twin."""

    def test_predict_cases(self):
        for name, case in PREDICT_CASES.items():
            with self.subTest(case=name):
                self.assertEqual(blind_predict(case["history"], case["k"]), case["expected"])

    def test_empty_history(self):
        with self.assertRaises(EmptyHistoryError):
            blind_predict([], 3)

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            BlindConfig(0)

    def test_one_pass_matches_direct_mode(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 4, size=400)
        labels[100:160] = 2
        for k in (1, 2, 3, 5, 8, 32):
            with self.subTest(k=k):
                fast = blind_predictions(labels, k)
                direct = [blind_predict(labels[:t + 1].tolist(), k) for t in range(len(labels))]
                np.testing.assert_array_equal(fast, direct)

    def test_prediction_is_in_window(self):
        rng = np.random.default_rng(8)
        labels = rng.integers(0, 6, size=200)
        predictions = blind_predictions(labels, 4)
        for t in range(len(labels)):
            self.assertIn(predictions[t], labels[max(0, t - 3):t + 1])


class BlindAccuracyTests(unittest.TestCase):
    """Tests for blind_accuracy and search_k."""

    def test_constant_stream(self):
        labels = np.full(50, 3)
        for k, shift in ((1, 0), (4, 10), (16, 48)):
            self.assertEqual(blind_accuracy(labels, k, shift), 1.0)

    def test_shift_too_large(self):
        with self.assertRaises(StepRangeError):
            blind_accuracy(np.zeros(10, dtype=int), 1, 9)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(1)
        labels = np.repeat(rng.integers(0, 7, size=100), 5)
        permutation = rng.permutation(7)
        for k, shift in ((1, 0), (3, 2), (8, 6)):
            self.assertEqual(blind_accuracy(labels, k, shift),
                             blind_accuracy(permutation[labels], k, shift))

    def test_search_prefers_k1_on_fixed_bursts(self):
        stream = generate(make_spec(num_classes=20, feature_dim=2, length=8000, burst_length=16, seed=0))
        self.assertEqual(search_k(stream, (1, 2, 4, 8, 16)), 1)

    def test_search_tie_returns_smallest(self):
        labels = np.tile([0, 0, 1, 1], 25)
        self.assertEqual(blind_accuracy(labels, 1, 0), blind_accuracy(labels, 2, 0))
        self.assertEqual(search_k(labels, (2, 1), search_fraction=1.0), 1)

    def test_singleton_grid(self):
        labels = np.tile([0, 1, 2], 30)
        self.assertEqual(search_k(labels, (5,)), 5)


class CalibrationTests(unittest.TestCase):
    """Tests for calibrate_shift."""

    def test_default_shift_grid(self):
        self.assertEqual(default_shift_grid(64), [0, 1, 2, 4, 8, 16])
        self.assertEqual(default_shift_grid(3), [0])

    def test_iid_labels_need_no_shift(self):
        labels = np.random.default_rng(4).integers(0, 10, size=50000)
        result = calibrate_shift(labels, (1,), [0, 1, 2, 4, 8, 16], epsilon=0.01)
        self.assertEqual(result.s_star, 0)
        self.assertFalse(result.degenerate)

    def test_bursty_stream_curve(self):
        stream = generate(make_spec(num_classes=20, feature_dim=2, length=40000, burst_length=8, seed=5))
        shifts = [0, 1, 2, 4, 8, 16, 32, 64]
        result = calibrate_shift(stream, (1, 2, 4), shifts, epsilon=0.02)
        self.assertEqual(set(result.curve), set(shifts))
        self.assertEqual(result.s_star, 8)
        self.assertEqual(result.plateau_level, result.curve[64])
        for shift in shifts:
            if shift < result.s_star:
                self.assertGreater(result.curve[shift], result.plateau_level + result.epsilon)
            self.assertEqual(result.curve[shift], result.k_table[shift][result.best_k[shift]])

    def test_curve_is_non_increasing_on_fixed_bursts(self):
        for classes, burst in ((20, 8), (10, 16)):
            with self.subTest(classes=classes, burst=burst):
                stream = generate(make_spec(num_classes=classes, feature_dim=2, length=40000,
                                            burst_length=burst, seed=7))
                shifts = list(range(0, 3 * burst))
                curve = calibrate_shift(stream, (1, 2, 4), shifts).curve
                bursts = 40000 / burst
                for previous, shift in zip(shifts, shifts[1:]):
                    p = max(curve[previous], 1 / classes)
                    stderr = np.sqrt(p * (1 - p) / bursts)
                    self.assertLessEqual(curve[shift], curve[previous] + 3 * stderr)

    def test_threaded_matches_sequential(self):
        stream = generate(make_spec(num_classes=5, feature_dim=2, length=3000, burst_length=6, seed=2))
        grid = [0, 1, 2, 4, 8]
        sequential = calibrate_shift(stream, (1, 2, 4, 8), grid)
        threaded = calibrate_shift(stream, (1, 2, 4, 8), grid, max_workers=4)
        self.assertEqual(sequential.curve, threaded.curve)
        self.assertEqual(sequential.best_k, threaded.best_k)

    def test_single_class_is_degenerate(self):
        result = calibrate_shift(np.zeros(100, dtype=int), (1, 2), [0, 1, 2])
        self.assertTrue(result.degenerate)
        self.assertEqual(result.s_star, 0)
        self.assertTrue(result.warnings)

    def test_grid_validation(self):
        labels = np.tile([0, 1], 20)
        with self.assertRaises(ConfigError):
            calibrate_shift(labels, (1,), [1, 2])
        with self.assertRaises(ConfigError):
            calibrate_shift(labels, (1,), [0, 4, 2])
        with self.assertRaises(ConfigError):
            calibrate_shift(labels, (1,), [0, 39])
        with self.assertRaises(ConfigError):
            calibrate_shift(labels, (), [0])


if __name__ == "__main__":
    unittest.main()
