#!/usr/bin/env python3
"""
Tests for the result files and the command line entry point.
"""

import csv
import json
import os

import pytest

from main import main
from ocleval.blind_calibration import calibrate_shift
from ocleval.budget_harness import run_experiment, run_sweep
from ocleval.config import config_to_dict, parse_config_dict
from ocleval.errors import DataError
from ocleval.reports import (
    collect_summaries,
    emit_calibration,
    emit_reports,
    emit_sweep,
    format_number,
    write_comparison,
)

CONFIG = {
    "label": "er-small",
    "stream": {"synthetic": {"num_classes": 4, "feature_dim": 4, "length": 400,
                             "burst_length": 8, "noise_sigma": 0.3, "seed": 2}},
    "learner": {"kind": "er", "learning_rate": 0.05},
    "protocol": {"batch_size": 8, "shift": 16},
    "sampler": "uniform",
}


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def write_config(directory, data):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "experiment.json")
    with open(path, "w") as f:
        json.dump(data, f)
    return path


@pytest.mark.parametrize("value,expected", [
    (None, ""),
    (0.75, "0.75"),
    (1 / 3, "0.3333333333"),
    (12, "12"),
    (True, "true"),
])
def test_format_number(value, expected):
    assert format_number(value) == expected


def test_ten_step_run_files(temp_subdir):
    cfg = parse_config_dict({**CONFIG, "stream": {"synthetic": {**CONFIG["stream"]["synthetic"],
                                                                "length": 80}},
                             "holdout_fraction": 0.0})
    records, retention, summary = run_experiment(cfg)
    written = emit_reports(records, retention, summary, temp_subdir, config_to_dict(cfg))

    names = sorted(os.path.basename(p) for p in written)
    assert names == ["curve.csv", "effective_config.json", "retention.csv", "steps.jsonl",
                     "summary.json", "timing.json"]
    curve = read_csv(os.path.join(temp_subdir, "curve.csv"))
    assert curve[0] == ["step", "running_accuracy", "online_accuracy"]
    assert 1 <= len(curve) - 1 <= 10
    assert len(curve) - 1 == sum(1 for r in records if r.scored > 0)
    # no holdout: header only
    assert read_csv(os.path.join(temp_subdir, "retention.csv")) == [["step_bin", "accuracy", "count"]]

    with open(os.path.join(temp_subdir, "steps.jsonl")) as f:
        lines = [json.loads(line) for line in f]
    assert [line["step"] for line in lines] == list(range(10))
    with open(os.path.join(temp_subdir, "summary.json")) as f:
        stored = json.load(f)
    assert "wall_time_seconds" not in stored
    assert stored["near_future_accuracy"] == summary.near_future_accuracy


def test_retention_rows_match_bins(temp_subdir):
    cfg = parse_config_dict(CONFIG)
    records, retention, summary = run_experiment(cfg)
    emit_reports(records, retention, summary, temp_subdir)
    rows = read_csv(os.path.join(temp_subdir, "retention.csv"))[1:]
    assert [int(row[0]) for row in rows] == sorted(retention.per_step_accuracy)
    assert sum(int(row[2]) for row in rows) == retention.scored_count
    assert not os.path.exists(os.path.join(temp_subdir, "effective_config.json"))


def test_rerun_is_byte_identical(temp_subdir):
    cfg = parse_config_dict(CONFIG)
    first, second = os.path.join(temp_subdir, "a"), os.path.join(temp_subdir, "b")
    for out in (first, second):
        emit_reports(*run_experiment(cfg), out, config_to_dict(cfg))
    for name in ("steps.jsonl", "curve.csv", "retention.csv", "summary.json", "effective_config.json"):
        assert read_bytes(os.path.join(first, name)) == read_bytes(os.path.join(second, name))


def test_output_dir_that_is_a_file(temp_subdir):
    os.makedirs(temp_subdir)
    blocker = os.path.join(temp_subdir, "taken")
    with open(blocker, "w") as f:
        f.write("x")
    cfg = parse_config_dict(CONFIG)
    with pytest.raises(DataError):
        emit_reports(*run_experiment(cfg), blocker)


def test_calibration_files(temp_subdir, bursty_stream):
    result = calibrate_shift(bursty_stream, (1, 2), [0, 8, 16, 32, 64])
    emit_calibration(result, temp_subdir)
    rows = read_csv(os.path.join(temp_subdir, "calibration.csv"))
    assert rows[0] == ["shift", "best_K", "accuracy"]
    assert [int(row[0]) for row in rows[1:]] == [0, 8, 16, 32, 64]
    with open(os.path.join(temp_subdir, "calibration.json")) as f:
        payload = json.load(f)
    assert payload["s_star"] == result.s_star
    assert payload["k_grid"] == [1, 2]


def test_sweep_and_comparison(temp_subdir):
    base = parse_config_dict(CONFIG)
    outcomes = run_sweep(base, {"sampler": ["fifo", "uniform"], "learner.learning_rate": [0.05, -1]})
    emit_sweep(outcomes, temp_subdir)

    sweep_rows = read_csv(os.path.join(temp_subdir, "sweep.csv"))
    assert len(sweep_rows) == 5
    assert [row[-1] != "" for row in sweep_rows[1:]] == [False, True, False, True]
    assert os.path.isdir(os.path.join(temp_subdir, "point_000"))
    assert not os.path.exists(os.path.join(temp_subdir, "point_001"))

    summaries = collect_summaries(temp_subdir)
    assert [s["_path"] for s in summaries] == ["point_000", "point_002"]
    comparison = write_comparison(summaries, os.path.join(temp_subdir, "comparison.csv"))
    rows = read_csv(comparison)
    assert rows[0][:3] == ["label", "sampler", "learner_kind"]
    assert [row[1] for row in rows[1:]] == ["fifo", "uniform"]


def test_collect_from_missing_directory(temp_subdir):
    with pytest.raises(DataError):
        collect_summaries(temp_subdir)


def test_cli_without_command():
    assert main([]) == 0


def test_cli_gen_run_calibrate_report(temp_subdir):
    data_dir = os.path.join(temp_subdir, "data")
    assert main(["gen", "--classes", "4", "--dim", "4", "--length", "400", "--burst-length", "8",
                 "--sigma", "0.2", "--out", data_dir]) == 0
    features = os.path.join(data_dir, "features.bin")
    labels = os.path.join(data_dir, "labels.jsonl")
    assert os.path.exists(features) and os.path.exists(labels)

    config = write_config(temp_subdir, {**CONFIG, "stream": {"features": features, "labels": labels}})
    run_dir = os.path.join(temp_subdir, "runs", "er")
    assert main(["run", config, "--out", run_dir]) == 0
    assert os.path.exists(os.path.join(run_dir, "summary.json"))

    cal_dir = os.path.join(temp_subdir, "cal")
    assert main(["calibrate", "--features", features, "--labels", labels,
                 "--k-grid", "1,2", "--shifts", "0,4,8,16", "--out", cal_dir]) == 0
    assert os.path.exists(os.path.join(cal_dir, "calibration.csv"))

    assert main(["report", os.path.join(temp_subdir, "runs")]) == 0
    rows = read_csv(os.path.join(temp_subdir, "runs", "comparison.csv"))
    assert len(rows) == 2
    assert rows[1][0] == "er-small"


def test_cli_sweep(temp_subdir):
    config = write_config(temp_subdir, CONFIG)
    out = os.path.join(temp_subdir, "sweep")
    assert main(["sweep", config, "--axis", "learner.learning_rate=0.01,0.05", "--workers", "2",
                 "--out", out]) == 0
    assert len(read_csv(os.path.join(out, "sweep.csv"))) == 3


@pytest.mark.parametrize("changes,code", [
    ({"learner": {"kind": "er", "learning_rte": 0.1}}, 2),
    ({"stream": {"features": "missing.bin", "labels": "missing.jsonl"}}, 3),
])
def test_cli_exit_codes(temp_subdir, changes, code):
    config = write_config(temp_subdir, {**CONFIG, **changes})
    with pytest.raises(SystemExit) as excinfo:
        main(["run", config, "--out", os.path.join(temp_subdir, "out")])
    assert excinfo.value.code == code


def test_cli_sweep_needs_an_axis(temp_subdir):
    config = write_config(temp_subdir, CONFIG)
    with pytest.raises(SystemExit) as excinfo:
        main(["sweep", config])
    assert excinfo.value.code == 2
