#!/usr/bin/env python3
"""
Test runner for ocleval.

Runs all or selected test modules, with or without the slow acceptance runs.
"""

import argparse
import os
import sys

import pytest

MODULES = [
    "stream_model",
    "synthetic_stream",
    "blind_calibration",
    "metrics",
    "replay_buffer",
    "learners",
    "budget_harness",
    "config",
    "reports",
    "run_logger",
    "acceptance",
]


def discover_and_run_tests(module_name=None, fast=False, verbose=False, keyword=None):
    """
    Run the tests for every module or for a single one.

    Args:
        module_name: Optional short module name, e.g. "metrics"
        fast: Deselect the acceptance runs
        verbose: Pass -v to pytest
        keyword: Optional pytest -k expression

    Returns:
        True if all tests passed, False otherwise
    """
    if module_name:
        target = f"test_{module_name.lower()}.py"
        if not os.path.exists(target):
            print(f"Error: Could not find test module for '{module_name}'")
            print(f"Available modules: {', '.join(MODULES)}")
            return False
    else:
        target = "."

    args = [target]
    if fast:
        args += ["-m", "not acceptance"]
    if keyword:
        args += ["-k", keyword]
    if verbose:
        args.append("-v")

    return pytest.main(args) == 0


def main():
    """Parse arguments and run tests."""
    parser = argparse.ArgumentParser(description="Run ocleval tests")
    parser.add_argument("--module", help=f"Run tests for one module ({', '.join(MODULES)})")
    parser.add_argument("--keyword", "-k", help="Only tests matching this pytest -k expression")
    parser.add_argument("--fast", action="store_true", help="Skip the full-size acceptance runs")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose output")

    args = parser.parse_args()

    # Change to the test directory
    os.chdir(os.path.dirname(os.path.abspath(__file__)))

    success = discover_and_run_tests(args.module, args.fast, args.verbose, args.keyword)
    return 0 if success else 1


if __name__ == "__main__":
    sys.exit(main())
