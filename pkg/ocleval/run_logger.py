"""
Debug logging module for ocleval
Saves effective configs, per-step traces, calibration tables and sweep failures
for inspecting a session after the fact.
"""

import datetime
import json
import os
import threading
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

DEFAULT_LOG_DIR = "debug-logs"


class RunLogger:
    """Handles debug logging for experiment runs."""

    def __init__(self, enabled: bool = False, log_dir: Optional[str] = None):
        self.enabled = enabled
        self.log_dir = Path(log_dir or os.getenv("OCLEVAL_DEBUG_DIR") or DEFAULT_LOG_DIR)
        self.session_id = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        self._run_counter = 0
        self._lock = threading.Lock()

        if self.enabled:
            self._setup_log_directory()

    def _setup_log_directory(self):
        """Create the log directory if it doesn't exist."""
        try:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            print(f"📁 Debug logging enabled. Logs will be saved to: {self.log_dir}")
        except Exception as e:
            print(f"⚠️  Warning: Could not create debug directory {self.log_dir}: {e}")
            self.enabled = False

    def _write_json(self, filename: str, payload: Any) -> Optional[Path]:
        filepath = self.log_dir / filename
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, default=str)
        return filepath

    def log_effective_config(self, config: Dict[str, Any]) -> int:
        """Save the effective config of an experiment. Returns the run number, counted even when disabled."""
        with self._lock:
            self._run_counter += 1
            run_number = self._run_counter
        if not self.enabled:
            return run_number

        try:
            filepath = self._write_json(
                f"effective_config_{self.session_id}_{run_number:03d}.json",
                {"timestamp": datetime.datetime.now().isoformat(), "config": config},
            )
            print(f"🐛 Effective config #{run_number} saved to: {filepath}")
        except Exception as e:
            print(f"⚠️  Warning: Could not save effective config: {e}")
            self.enabled = False
        return run_number

    def log_step_trace(self, run_number: int, records: Iterable[Dict[str, Any]],
                       label_heads: Optional[List[List[List[int]]]] = None):
        """Save every step record of a run, with the training-batch label histogram head."""
        if not self.enabled:
            return

        try:
            filepath = self.log_dir / f"step_trace_{self.session_id}_{run_number:03d}.jsonl"
            with open(filepath, "w", encoding="utf-8", newline="\n") as f:
                for position, record in enumerate(records):
                    line = dict(record)
                    if label_heads is not None and position < len(label_heads):
                        line["label_histogram_head"] = label_heads[position]
                    f.write(json.dumps(line) + "\n")
            print(f"🐛 Step trace #{run_number} saved to: {filepath}")
        except Exception as e:
            print(f"⚠️  Warning: Could not save step trace: {e}")
            self.enabled = False

    def log_calibration(self, calibration: Dict[str, Any]):
        """Save the full calibration curve and per-K table."""
        if not self.enabled:
            return

        try:
            filepath = self._write_json(
                f"calibration_{self.session_id}.json",
                {"timestamp": datetime.datetime.now().isoformat(), "calibration": calibration},
            )
            print(f"🐛 Calibration saved to: {filepath}")
        except Exception as e:
            print(f"⚠️  Warning: Could not save calibration: {e}")
            self.enabled = False

    def log_sweep_failure(self, index: int, point: Dict[str, Any], traceback_text: str):
        """Save a failed sweep point and its traceback."""
        if not self.enabled:
            return

        try:
            filepath = self._write_json(
                f"sweep_failure_{self.session_id}_{index:03d}.json",
                {
                    "timestamp": datetime.datetime.now().isoformat(),
                    "index": index,
                    "point": point,
                    "traceback": traceback_text,
                },
            )
            print(f"🐛 Sweep failure #{index} saved to: {filepath}")
        except Exception as e:
            print(f"⚠️  Warning: Could not save sweep failure: {e}")
            self.enabled = False


# Global run logger instance
_run_logger = None


def get_run_logger() -> RunLogger:
    """Get the global run logger instance."""
    global _run_logger
    if _run_logger is None:
        _run_logger = RunLogger()
    return _run_logger


def initialize_run_logger(enabled: bool = False, log_dir: Optional[str] = None) -> RunLogger:
    """Initialize the global run logger."""
    global _run_logger
    _run_logger = RunLogger(enabled=enabled, log_dir=log_dir)
    return _run_logger
