#!/usr/bin/env python3
"""
Tests for the debug run logger.
"""

import json
import os

from ocleval.budget_harness import run_experiment, run_sweep
from ocleval.config import parse_config_dict
from ocleval.run_logger import RunLogger, get_run_logger, initialize_run_logger

CONFIG = {
    "stream": {"synthetic": {"num_classes": 4, "feature_dim": 3, "length": 120, "burst_length": 8}},
    "learner": {"kind": "er"},
    "protocol": {"batch_size": 8, "shift": 8},
}


def logged_files(directory, prefix):
    return sorted(name for name in os.listdir(directory) if name.startswith(prefix))


def test_disabled_logger_writes_nothing(temp_subdir):
    logger = RunLogger(enabled=False, log_dir=temp_subdir)
    assert logger.log_effective_config({"seed": 0}) == 1
    logger.log_step_trace(1, [{"step": 0}])
    logger.log_calibration({"s_star": 0})
    assert not os.path.exists(temp_subdir)


def test_run_numbers_increase(temp_subdir):
    logger = RunLogger(enabled=True, log_dir=temp_subdir)
    assert [logger.log_effective_config({"run": i}) for i in range(3)] == [1, 2, 3]
    assert len(logged_files(temp_subdir, "effective_config_")) == 3


def test_environment_sets_directory(temp_subdir, monkeypatch):
    monkeypatch.setenv("OCLEVAL_DEBUG_DIR", temp_subdir)
    assert str(RunLogger().log_dir) == temp_subdir
    assert str(RunLogger(log_dir="elsewhere").log_dir) == "elsewhere"


def test_experiment_trace(temp_subdir):
    initialize_run_logger(enabled=True, log_dir=temp_subdir)
    records, _, _ = run_experiment(parse_config_dict(CONFIG))

    (config_file,) = logged_files(temp_subdir, "effective_config_")
    with open(os.path.join(temp_subdir, config_file)) as f:
        assert json.load(f)["config"]["learner"]["kind"] == "er"

    (trace_file,) = logged_files(temp_subdir, "step_trace_")
    with open(os.path.join(temp_subdir, trace_file)) as f:
        lines = [json.loads(line) for line in f]
    assert len(lines) == len(records)
    assert lines[0]["step"] == 0
    head = lines[0]["label_histogram_head"]
    assert sum(count for _, count in head) == 8


def test_sweep_failure_is_logged(temp_subdir):
    initialize_run_logger(enabled=True, log_dir=temp_subdir)
    run_sweep(parse_config_dict(CONFIG), {"learner.learning_rate": [-1.0]})
    (failure_file,) = logged_files(temp_subdir, "sweep_failure_")
    with open(os.path.join(temp_subdir, failure_file)) as f:
        payload = json.load(f)
    assert payload["point"] == {"learner.learning_rate": -1.0}
    assert "ConfigError" in payload["traceback"]


def test_unwritable_directory_disables_logging(temp_subdir):
    os.makedirs(temp_subdir)
    blocker = os.path.join(temp_subdir, "file")
    with open(blocker, "w") as f:
        f.write("x")
    logger = RunLogger(enabled=True, log_dir=blocker)
    assert not logger.enabled


def test_initialize_replaces_global():
    first = initialize_run_logger(enabled=False)
    assert get_run_logger() is first
    second = initialize_run_logger(enabled=False)
    assert get_run_logger() is second
