#!/usr/bin/env python3
"""
Unit tests for the bursty synthetic stream generator and its closed-form
blind-accuracy oracle.
"""

import unittest

import numpy as np

from ocleval.blind_calibration import blind_accuracy
from ocleval.errors import ConfigError
from ocleval.synthetic_stream import (
    BurstLaw,
    empirical_burst_lengths,
    expected_blind_accuracy,
    generate,
    generate_with_prototypes,
    initial_prototypes,
    make_spec,
)

# upper 1% point of the chi-square distribution with 49 degrees of freedom
CHI_SQUARE_49DF_1PCT = 74.919

ORACLE_CASES = {
    "no_shift": {"burst": 16, "classes": 50, "shift": 0, "expected": 0.93875},
    "one_burst_ahead": {"burst": 16, "classes": 50, "shift": 64, "expected": 0.02},
    "last_phase": {"burst": 16, "classes": 50, "shift": 15, "expected": 0.02},
    "partial": {"burst": 16, "classes": 50, "shift": 14, "expected": (1 + 15 / 50) / 16},
    "no_bursts": {"burst": 1, "classes": 10, "shift": 3, "expected": 0.1},
}


class GeneratorTests(unittest.TestCase):
    """Tests for generate()."""

    def test_two_bursts_of_prototypes(self):
        spec = make_spec(num_classes=2, feature_dim=2, length=6, burst_length=3, seed=4)
        stream = generate(spec)
        self.assertEqual(len(set(stream.labels[:3].tolist())), 1)
        self.assertEqual(len(set(stream.labels[3:].tolist())), 1)
        prototypes = initial_prototypes(spec).astype(np.float32)
        np.testing.assert_array_equal(stream.features, prototypes[stream.labels])

    def test_same_seed_same_stream(self):
        spec = make_spec(num_classes=5, feature_dim=4, length=300, noise_sigma=0.3, drift_rate=0.05, seed=9)
        first, second = generate(spec), generate(spec)
        self.assertEqual(first.features.tobytes(), second.features.tobytes())
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_fixed_bursts_are_aligned(self):
        spec = make_spec(num_classes=50, feature_dim=4, length=50000, burst_length=16, seed=1)
        labels = generate(spec).labels
        bursts = labels.reshape(-1, 16)
        self.assertTrue(np.all(bursts == bursts[:, :1]))
        # merged runs come from a class repeating in the next burst
        self.assertTrue(np.all(empirical_burst_lengths(labels) % 16 == 0))

    def test_label_marginal_roughly_uniform(self):
        spec = make_spec(num_classes=50, feature_dim=4, length=50000, burst_length=16, seed=1)
        counts = np.bincount(generate(spec).labels, minlength=50)
        # one class draw per burst: test the 3125 burst labels, not the 50000 samples
        bursts = counts / 16
        expected = 3125 / 50
        chi_square = float(np.sum((bursts - expected) ** 2 / expected))
        self.assertLess(chi_square, CHI_SQUARE_49DF_1PCT)

    def test_noisy_features_are_unit_norm(self):
        spec = make_spec(num_classes=4, feature_dim=8, length=200, noise_sigma=0.5, seed=2)
        norms = np.linalg.norm(generate(spec).features.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-5)

    def test_drift_moves_prototypes(self):
        spec = make_spec(num_classes=3, feature_dim=5, length=300, drift_rate=0.1, seed=2)
        _, final = generate_with_prototypes(spec)
        self.assertFalse(np.allclose(final, initial_prototypes(spec)))
        np.testing.assert_allclose(np.linalg.norm(final, axis=1), 1.0, atol=1e-12)

    def test_noiseless_prototypes_are_separable(self):
        spec = make_spec(num_classes=10, feature_dim=16, length=500, seed=6)
        stream = generate(spec)
        prototypes = initial_prototypes(spec)
        nearest = np.argmax(stream.features.astype(np.float64) @ prototypes.T, axis=1)
        np.testing.assert_array_equal(nearest, stream.labels)

    def test_geometric_law_mean(self):
        law = BurstLaw("geometric", 8)
        rng = np.random.default_rng(0)
        draws = np.array([law.draw(rng) for _ in range(20000)])
        self.assertGreaterEqual(draws.min(), 1)
        self.assertAlmostEqual(draws.mean(), 8.0, delta=0.3)

    def test_spec_validation(self):
        with self.assertRaises(ConfigError):
            make_spec(num_classes=1, feature_dim=2, length=10)
        with self.assertRaises(ConfigError):
            make_spec(num_classes=2, feature_dim=2, length=10, noise_sigma=-0.1)
        with self.assertRaises(ConfigError):
            BurstLaw("fixed", 2.5)
        with self.assertRaises(ConfigError):
            BurstLaw("poisson", 4)


class OracleTests(unittest.TestCase):
    """Tests for expected_blind_accuracy."""

    def test_oracle_cases(self):
        for name, case in ORACLE_CASES.items():
            with self.subTest(case=name):
                spec = make_spec(num_classes=case["classes"], feature_dim=2, length=1000,
                                 burst_length=case["burst"])
                self.assertAlmostEqual(expected_blind_accuracy(spec, case["shift"]),
                                       case["expected"], places=12)

    def test_unsupported_requests(self):
        spec = make_spec(num_classes=5, feature_dim=2, length=100)
        with self.assertRaises(NotImplementedError):
            expected_blind_accuracy(spec, 0, context_window=2)
        geometric = make_spec(num_classes=5, feature_dim=2, length=100, law="geometric")
        with self.assertRaises(NotImplementedError):
            expected_blind_accuracy(geometric, 0)

    def test_monte_carlo_agrees_with_oracle(self):
        spec = make_spec(num_classes=10, feature_dim=2, length=40000, burst_length=8, seed=11)
        stream = generate(spec)
        for shift in (0, 3, 6, 20):
            with self.subTest(shift=shift):
                expected = expected_blind_accuracy(spec, shift)
                # outcomes are correlated within a burst: count bursts, not samples
                stderr = np.sqrt(expected * (1 - expected) / (40000 / 8))
                self.assertLess(abs(blind_accuracy(stream, 1, shift) - expected), 3 * stderr)


if __name__ == "__main__":
    unittest.main()
