"""
Streaming accuracy accumulators and the backward-transfer retention report.

Running accuracy is kept as exact integer counters. The running-average
recursion A_t = (A_{t-1} (t-1) + a_t) / t applied per sample gives the same value
without the floating-point drift of millions of incremental updates.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ocleval.errors import ContractViolation
from ocleval.stream_model import TestStream


@dataclass(frozen=True)
class RunningAccuracy:
    correct_count: int = 0
    scored_count: int = 0

    def __post_init__(self):
        if self.correct_count < 0 or self.scored_count < 0:
            raise ContractViolation("accuracy counters cannot be negative")
        if self.correct_count > self.scored_count:
            raise ContractViolation(
                f"correct ({self.correct_count}) exceeds scored ({self.scored_count})"
            )

    @property
    def value(self) -> Optional[float]:
        """Derived running accuracy, None before anything was scored."""
        if self.scored_count == 0:
            return None
        return self.correct_count / self.scored_count

    def merge(self, other: "RunningAccuracy") -> "RunningAccuracy":
        return RunningAccuracy(self.correct_count + other.correct_count,
                               self.scored_count + other.scored_count)


def update_running(acc: RunningAccuracy, correct: int, scored: int) -> RunningAccuracy:
    """Add one batch worth of outcomes."""
    if correct < 0 or scored < 0 or correct > scored:
        raise ContractViolation(f"invalid batch outcome: {correct} correct of {scored}")
    return RunningAccuracy(acc.correct_count + correct, acc.scored_count + scored)


def batch_accuracy(predictions: Sequence[int], truths: Sequence[int]) -> Tuple[int, int]:
    """(number of exact matches, number compared)."""
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape:
        raise ContractViolation(
            f"{len(predictions)} predictions for {len(truths)} ground-truth labels"
        )
    return int(np.count_nonzero(predictions == truths)), int(truths.size)


@dataclass
class RetentionReport:
    """Final-model accuracy on held-out samples, binned by aligned training step."""

    per_step_accuracy: Dict[int, float]
    per_step_count: Dict[int, int]
    bwt_at_T: float
    final_step: int
    correct_count: int = 0
    scored_count: int = 0
    per_step_correct: Dict[int, int] = field(default_factory=dict)


def backward_transfer(final_predictions: Sequence[int], test: TestStream,
                      final_step: int) -> RetentionReport:
    """
    Backward Transfer @ T of the model at the end of the stream.

    Args:
        final_predictions: One prediction per test sample, in test order
        test: Test stream with step alignment
        final_step: T

    Returns:
        RetentionReport; bins without test samples are left out
    """
    predictions = np.asarray(final_predictions)
    if predictions.shape != test.labels.shape:
        raise ContractViolation(
            f"{len(predictions)} predictions for {test.length} test samples"
        )
    steps = np.asarray(test.step_of)
    if len(steps) and (steps.min() < 0 or steps.max() > final_step):
        raise ContractViolation(f"test alignment falls outside steps [0, {final_step}]")

    hits = predictions == test.labels
    per_step_accuracy: Dict[int, float] = {}
    per_step_count: Dict[int, int] = {}
    per_step_correct: Dict[int, int] = {}
    for step in np.unique(steps):
        in_bin = steps == step
        count = int(np.count_nonzero(in_bin))
        correct = int(np.count_nonzero(hits[in_bin]))
        per_step_count[int(step)] = count
        per_step_correct[int(step)] = correct
        per_step_accuracy[int(step)] = correct / count

    correct_total = int(np.count_nonzero(hits))
    return RetentionReport(
        per_step_accuracy=per_step_accuracy,
        per_step_count=per_step_count,
        bwt_at_T=correct_total / len(hits) if len(hits) else 0.0,
        final_step=final_step,
        correct_count=correct_total,
        scored_count=len(hits),
        per_step_correct=per_step_correct,
    )
