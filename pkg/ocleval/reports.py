"""
Result files for runs, sweeps and calibrations.

Everything except timing.json is a deterministic byte stream for a
deterministic run: keys are written in a fixed order, floats with a fixed
format and a period decimal separator, lines end in \\n.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from ocleval.blind_calibration import CalibrationResult
from ocleval.config import config_to_dict
from ocleval.errors import DataError
from ocleval.metrics import RetentionReport
from ocleval.run_logger import get_run_logger

PathLike = Union[str, Path]

COMPARISON_COLUMNS = ("label", "sampler", "learner_kind", "training", "near_future_accuracy",
                      "online_accuracy", "adaptation_gap", "bwt_at_T", "updates_total")


def format_number(value: Any) -> str:
    """Locale-independent CSV cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _prepare_dir(out_dir: PathLike) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"cannot create output directory {out_dir}: {e}") from e
    return out_dir


def _write_text(path: Path, text: str) -> Path:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    return path


def _write_json(path: Path, payload: Any) -> Path:
    return _write_text(path, json.dumps(payload, indent=2) + "\n")


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(cell) for cell in row])
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    return path


def emit_reports(records, retention: Optional[RetentionReport], summary, out_dir: PathLike,
                 config: Optional[Dict[str, Any]] = None) -> List[Path]:
    """
    Write the result files of one run.

    Args:
        records: StepRecords in step order
        retention: Retention report, or None for runs without holdout
        summary: RunSummary
        out_dir: Directory to write into (created if missing)
        config: Effective config echo to store next to the results

    Returns:
        Paths written: steps.jsonl, curve.csv, retention.csv, summary.json,
        timing.json and, with config, effective_config.json
    """
    out_dir = _prepare_dir(out_dir)
    written = []

    lines = "".join(json.dumps(record.to_dict()) + "\n" for record in records)
    written.append(_write_text(out_dir / "steps.jsonl", lines))

    curve_rows = [
        (r.step, r.running_accuracy, r.online_accuracy)
        for r in records if r.scored > 0
    ]
    written.append(_write_csv(out_dir / "curve.csv",
                              ("step", "running_accuracy", "online_accuracy"), curve_rows))

    retention_rows = []
    if retention is not None:
        retention_rows = [
            (step, retention.per_step_accuracy[step], retention.per_step_count[step])
            for step in sorted(retention.per_step_accuracy)
        ]
    written.append(_write_csv(out_dir / "retention.csv",
                              ("step_bin", "accuracy", "count"), retention_rows))

    written.append(_write_json(out_dir / "summary.json", summary.to_dict()))
    written.append(_write_json(out_dir / "timing.json",
                               {"wall_time_seconds": summary.wall_time_seconds}))
    if config is not None:
        written.append(_write_json(out_dir / "effective_config.json", config))
    return written


def calibration_to_dict(result: CalibrationResult) -> Dict[str, Any]:
    shifts = sorted(result.curve)
    k_grid = sorted(next(iter(result.k_table.values()))) if result.k_table else []
    return {
        "s_star": result.s_star,
        "plateau_level": result.plateau_level,
        "epsilon": result.epsilon,
        "degenerate": result.degenerate,
        "warnings": list(result.warnings),
        "k_grid": k_grid,
        "shifts": shifts,
        "curve": [{"shift": s, "best_k": result.best_k[s], "accuracy": result.curve[s]}
                  for s in shifts],
        "k_table": {str(s): {str(k): result.k_table[s][k] for k in k_grid} for s in shifts},
    }


def emit_calibration(result: CalibrationResult, out_dir: PathLike) -> List[Path]:
    """Write calibration.csv (shift, best_K, accuracy) and calibration.json."""
    out_dir = _prepare_dir(out_dir)
    payload = calibration_to_dict(result)
    rows = [(s, result.best_k[s], result.curve[s]) for s in payload["shifts"]]
    written = [
        _write_csv(out_dir / "calibration.csv", ("shift", "best_K", "accuracy"), rows),
        _write_json(out_dir / "calibration.json", payload),
    ]
    get_run_logger().log_calibration(payload)
    return written


def emit_sweep(outcomes, out_dir: PathLike) -> List[Path]:
    """One run directory per grid point plus sweep.csv with a row per point."""
    out_dir = _prepare_dir(out_dir)
    written = []
    rows = []
    for outcome in outcomes:
        if outcome.summary is not None:
            written.extend(emit_reports(
                outcome.records, outcome.retention, outcome.summary,
                out_dir / f"point_{outcome.index:03d}", config_to_dict(outcome.config),
            ))
        summary = outcome.summary
        rows.append((
            outcome.index,
            json.dumps(outcome.overrides, sort_keys=True),
            None if summary is None else summary.near_future_accuracy,
            None if summary is None else summary.online_accuracy,
            None if summary is None else summary.bwt_at_T,
            outcome.error or "",
        ))
    written.append(_write_csv(
        out_dir / "sweep.csv",
        ("index", "overrides", "near_future_accuracy", "online_accuracy", "bwt_at_T", "error"),
        rows,
    ))
    return written


def collect_summaries(root: PathLike) -> List[Dict[str, Any]]:
    """Every summary.json below root, ordered by path."""
    root = Path(root)
    if not root.exists():
        raise DataError(f"report directory {root} does not exist")
    summaries = []
    for path in sorted(root.rglob("summary.json")):
        try:
            summary = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read {path}: {e}") from e
        summary.setdefault("label", None)
        summary["_path"] = str(path.parent.relative_to(root))
        summaries.append(summary)
    return summaries


def write_comparison(summaries: List[Dict[str, Any]], out_path: PathLike) -> Path:
    """Comparison CSV with one row per run; unlabelled runs are named by directory."""
    out_path = Path(out_path)
    _prepare_dir(out_path.parent)
    rows = []
    for summary in summaries:
        row = [summary.get(column) for column in COMPARISON_COLUMNS]
        if row[0] is None:
            row[0] = summary.get("_path", "")
        rows.append(row)
    return _write_csv(out_path, COMPARISON_COLUMNS, rows)
