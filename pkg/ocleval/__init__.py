"""
ocleval - online continual learning evaluation engine.

Streams, the blind classifier and shift calibration, replay buffers, online
learners, and the budgeted evaluate-then-train harness.
"""

from ocleval.budget_harness import run_experiment, run_sweep, updates_allowed
from ocleval.config import ExperimentConfig, parse_config
from ocleval.errors import OclEvalError

__all__ = [
    "ExperimentConfig",
    "OclEvalError",
    "parse_config",
    "run_experiment",
    "run_sweep",
    "updates_allowed",
]
