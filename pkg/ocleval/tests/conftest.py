#!/usr/bin/env python3
"""
Pytest configuration and fixtures for the ocleval tests.
"""

import os
import shutil

import numpy as np
import pytest

from ocleval.run_logger import initialize_run_logger
from ocleval.synthetic_stream import generate, make_spec


@pytest.fixture(scope="session")
def test_dir():
    """Return the absolute path to the test directory."""
    return os.path.dirname(os.path.abspath(__file__))


@pytest.fixture(scope="session")
def temp_dir(test_dir):
    """
    Create and return a temporary directory for test files.
    This directory will be deleted after all tests are completed.
    """
    temp_path = os.path.join(test_dir, "temp")
    os.makedirs(temp_path, exist_ok=True)

    yield temp_path

    # Cleanup after all tests
    if os.path.exists(temp_path):
        shutil.rmtree(temp_path)


@pytest.fixture(scope="function")
def temp_subdir(temp_dir):
    """
    Return a path to a fresh, not yet existing directory inside temp_dir.
    Each test gets a unique path.
    """
    rng = np.random.default_rng()
    name = "".join(chr(ord("a") + int(i)) for i in rng.integers(0, 26, size=10))
    return os.path.join(temp_dir, f"run_{name}")


@pytest.fixture(scope="session")
def bursty_stream():
    """Small noisy bursty stream shared by read-only tests."""
    return generate(make_spec(num_classes=8, feature_dim=6, length=640, burst_length=16,
                              noise_sigma=0.2, seed=3))


@pytest.fixture(autouse=True)
def quiet_run_logger():
    """Every test starts with the global run logger disabled."""
    initialize_run_logger(enabled=False)
    yield
