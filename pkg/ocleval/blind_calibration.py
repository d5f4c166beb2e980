"""
Blind classifier and evaluation-shift calibration.

The blind classifier never looks at features: it predicts the mode of the last K
revealed labels. Its accuracy on labels S+1 positions ahead measures how much
label autocorrelation a stream carries at that distance. Calibration sweeps S
and picks the smallest shift at which the blind classifier is no better than
its own plateau, i.e. where the label correlation is gone.
"""

import concurrent.futures
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ocleval.errors import ConfigError, EmptyHistoryError, StepRangeError
from ocleval.stream_model import LabeledStream

DEFAULT_K_GRID = (1, 2, 4, 8, 16, 32, 64, 128)
DEFAULT_SEARCH_FRACTION = 0.1

LabelSource = Union[LabeledStream, np.ndarray, Sequence[int]]


@dataclass(frozen=True)
class BlindConfig:
    context_window: int = 1

    def __post_init__(self):
        if not isinstance(self.context_window, int) or self.context_window < 1:
            raise ConfigError(f"context window K must be >= 1, got {self.context_window!r}")


@dataclass
class CalibrationResult:
    """Blind accuracy-vs-shift curve and the selected shift."""

    curve: Dict[int, float]
    best_k: Dict[int, int]
    s_star: int
    plateau_level: float
    epsilon: float
    k_table: Dict[int, Dict[int, float]] = field(default_factory=dict)
    degenerate: bool = False
    warnings: List[str] = field(default_factory=list)


def _labels_of(source: LabelSource) -> np.ndarray:
    if isinstance(source, LabeledStream):
        return source.labels
    return np.asarray(source, dtype=np.int64)


def blind_predict(history: Sequence[int], context_window: int) -> int:
    """
    Mode of the last K labels of history.

    Ties go to the tied label whose most recent occurrence is latest.

    Raises:
        EmptyHistoryError: If no label has been revealed yet
    """
    if context_window < 1:
        raise ConfigError(f"context window K must be >= 1, got {context_window}")
    if len(history) == 0:
        raise EmptyHistoryError("blind classifier has no revealed label to predict from")

    window = list(history[-context_window:])
    counts: Dict[int, int] = defaultdict(int)
    for label in window:
        counts[label] += 1
    top = max(counts.values())
    for label in reversed(window):
        if counts[label] == top:
            return int(label)
    raise AssertionError("unreachable")


def blind_predictions(labels: LabelSource, context_window: int) -> np.ndarray:
    """
    Blind prediction made after each revealed position.

    Entry t is blind_predict(labels[:t + 1], K). Computed in one pass with count
    buckets so the cost per position does not grow with K on bursty streams.
    """
    labels = _labels_of(labels)
    if context_window < 1:
        raise ConfigError(f"context window K must be >= 1, got {context_window}")
    if context_window == 1:
        return labels.copy()

    values = labels.tolist()
    predictions = np.empty(len(values), dtype=np.int64)
    counts: Dict[int, int] = {}
    last_seen: Dict[int, int] = {}
    buckets: Dict[int, set] = defaultdict(set)
    top = 0

    for t, label in enumerate(values):
        count = counts.get(label, 0)
        if count:
            buckets[count].discard(label)
        counts[label] = count + 1
        buckets[count + 1].add(label)
        last_seen[label] = t
        top = max(top, count + 1)

        if t >= context_window:
            leaving = values[t - context_window]
            count = counts[leaving]
            buckets[count].discard(leaving)
            if count == 1:
                del counts[leaving]
            else:
                counts[leaving] = count - 1
                buckets[count - 1].add(leaving)
            if not buckets[top]:
                top -= 1

        candidates = buckets[top]
        if label in candidates:
            predictions[t] = label
        else:
            predictions[t] = max(candidates, key=last_seen.__getitem__)
    return predictions


def _accuracy_at_shift(predictions: np.ndarray, labels: np.ndarray, shift: int) -> float:
    scored = len(labels) - shift - 1
    return float(np.mean(predictions[:scored] == labels[shift + 1:]))


def blind_accuracy(stream: LabelSource, context_window: int, shift: int) -> float:
    """
    Accuracy of the blind classifier predicting the label S+1 positions ahead.

    Args:
        stream: Stream (or bare label sequence)
        context_window: K
        shift: S

    Returns:
        Fraction of positions t in [0, N-S-2] where the mode of labels
        [t-K+1, t] equals label t+1+S
    """
    labels = _labels_of(stream)
    if shift < 0 or shift + 1 >= len(labels):
        raise StepRangeError(f"shift {shift} leaves nothing to score in {len(labels)} labels")
    return _accuracy_at_shift(blind_predictions(labels, context_window), labels, shift)


def search_k(stream: LabelSource, k_grid: Sequence[int] = DEFAULT_K_GRID,
             search_fraction: float = DEFAULT_SEARCH_FRACTION) -> int:
    """
    Pick the context window with the best S=0 blind accuracy on a stream prefix.

    Ties go to the smallest K.
    """
    labels = _labels_of(stream)
    if not k_grid:
        raise ConfigError("K grid is empty")
    if not 0.0 < search_fraction <= 1.0:
        raise ConfigError(f"search fraction must lie in (0, 1], got {search_fraction}")

    prefix = labels[:max(2, int(np.ceil(search_fraction * len(labels))))]
    best_k, best_accuracy = None, -1.0
    for k in sorted(k_grid):
        accuracy = blind_accuracy(prefix, k, 0)
        if accuracy > best_accuracy:
            best_k, best_accuracy = k, accuracy
    return best_k


def default_shift_grid(length: int) -> List[int]:
    """{0} and every power of two up to N/4."""
    grid = [0]
    power = 1
    while power <= length / 4:
        grid.append(power)
        power *= 2
    return grid


def calibrate_shift(stream: LabelSource, k_grid: Sequence[int] = DEFAULT_K_GRID,
                    shift_grid: Optional[Sequence[int]] = None, epsilon: float = 0.01,
                    max_workers: Optional[int] = None) -> CalibrationResult:
    """
    Sweep the evaluation shift and select the smallest decorrelating one.

    For every shift the best blind accuracy over the K grid is recorded. The
    plateau is the accuracy at the largest probed shift; s_star is the first
    shift whose accuracy is within epsilon of the plateau.

    Args:
        stream: Stream to audit
        k_grid: Context windows to try at every shift
        shift_grid: Increasing shifts starting at 0 (default: default_shift_grid)
        epsilon: Absolute closeness to the plateau
        max_workers: Threads used to compute per-K predictions (None: sequential)

    Returns:
        CalibrationResult
    """
    labels = _labels_of(stream)
    if shift_grid is None:
        shift_grid = default_shift_grid(len(labels))
    shift_grid = [int(s) for s in shift_grid]
    k_grid = sorted(int(k) for k in k_grid)

    if not shift_grid:
        raise ConfigError("shift grid is empty")
    if shift_grid[0] != 0:
        raise ConfigError(f"shift grid must start at 0, starts at {shift_grid[0]}")
    if any(b <= a for a, b in zip(shift_grid, shift_grid[1:])):
        raise ConfigError("shift grid must be strictly increasing")
    if shift_grid[-1] >= len(labels) - 1:
        raise ConfigError(
            f"largest shift {shift_grid[-1]} must be below N-1 = {len(labels) - 1}"
        )
    if not k_grid or k_grid[0] < 1:
        raise ConfigError("K grid must be non-empty and positive")
    if epsilon < 0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}")

    if max_workers and max_workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            futures = {k: executor.submit(blind_predictions, labels, k) for k in k_grid}
            predictions = {k: futures[k].result() for k in k_grid}
    else:
        predictions = {k: blind_predictions(labels, k) for k in k_grid}

    curve: Dict[int, float] = {}
    best_k: Dict[int, int] = {}
    k_table: Dict[int, Dict[int, float]] = {}
    for shift in shift_grid:
        row = {k: _accuracy_at_shift(predictions[k], labels, shift) for k in k_grid}
        k_table[shift] = row
        # k_grid is sorted, so max() keeps the smallest K among ties
        chosen = max(k_grid, key=lambda k: row[k])
        best_k[shift] = chosen
        curve[shift] = row[chosen]

    plateau = curve[shift_grid[-1]]
    result = CalibrationResult(curve=curve, best_k=best_k, s_star=shift_grid[-1],
                               plateau_level=plateau, epsilon=epsilon, k_table=k_table)

    if len(np.unique(labels)) == 1:
        result.s_star = 0
        result.degenerate = True
        result.warnings.append("stream has a single class; blind accuracy is 1 at every shift")
        return result

    for shift in shift_grid:
        if curve[shift] <= plateau + epsilon:
            result.s_star = shift
            break
    return result
