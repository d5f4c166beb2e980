"""
Evaluate-then-train experiment loop, compute budget and parameter sweeps.

Per step t the harness
    1. scores the current learner on the near-future range (training range
       shifted by S) and, separately, on the step's own training batch,
    2. inserts the training batch into the replay buffer,
    3. runs the budgeted number of updates.
After the last step the final learner is scored on the held-out test stream.
"""

import concurrent.futures
import itertools
import math
import time
import traceback
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ocleval.config import BudgetConfig, ExperimentConfig, StreamSource, config_to_dict, with_overrides
from ocleval.errors import ConfigError, ContractViolation, ExperimentError
from ocleval.learners import Learner, build_learner, learner_predict, learner_update
from ocleval.metrics import (
    RetentionReport,
    RunningAccuracy,
    backward_transfer,
    batch_accuracy,
    update_running,
)
from ocleval.replay_buffer import ReplayBuffer, insert_batch
from ocleval.run_logger import get_run_logger
from ocleval.stream_model import LabeledStream, TestStream, batch_at, eval_indices, load_stream, split_holdout
from ocleval.synthetic_stream import generate

# Returned by updates_allowed for zero-cost learners; the harness applies them once per step
UNBOUNDED = -1

HISTOGRAM_HEAD = 3

Axes = Union[Mapping[str, Sequence[Any]], Sequence[Tuple[str, Sequence[Any]]]]


@dataclass
class StepRecord:
    step: int
    trained_on: Tuple[int, int]
    evaluated_range: Optional[Tuple[int, int]]
    correct: int
    scored: int
    running_accuracy: Optional[float]
    updates: int
    online_correct: int = 0
    online_scored: int = 0
    online_accuracy: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["trained_on"] = list(self.trained_on)
        record["evaluated_range"] = None if self.evaluated_range is None else list(self.evaluated_range)
        return record


@dataclass
class RunSummary:
    label: Optional[str]
    learner_kind: str
    sampler: str
    training: str
    batch_size: int
    shift: int
    seed: int
    steps: int
    near_future_accuracy: Optional[float]
    near_future_scored: int
    online_accuracy: Optional[float]
    online_scored: int
    adaptation_gap: Optional[float]
    bwt_at_T: Optional[float]
    retention_scored: int
    updates_total: int
    wall_time_seconds: float = 0.0

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        summary = asdict(self)
        if not include_timing:
            del summary["wall_time_seconds"]
        return summary


@dataclass
class SweepOutcome:
    """One grid point of a sweep; summary is None when the point failed."""

    index: int
    overrides: Dict[str, Any]
    config: Optional[ExperimentConfig] = None
    records: List[StepRecord] = field(default_factory=list)
    retention: Optional[RetentionReport] = None
    summary: Optional[RunSummary] = None
    error: Optional[str] = None


def updates_allowed(budget: BudgetConfig, kind: str) -> int:
    """
    Number of updates a learner may perform per step under the budget.

    Args:
        budget: Units per step and per-kind update costs
        kind: Learner kind

    Returns:
        floor(units_per_step / cost), or UNBOUNDED for zero-cost learners

    Raises:
        ConfigError: If no cost is declared for kind
    """
    if kind not in budget.cost_per_update:
        raise ConfigError(f"no update cost declared for learner kind {kind!r}",
                          f"budget.cost_per_update.{kind}")
    cost = budget.cost_per_update[kind]
    if cost == 0:
        return UNBOUNDED
    # tolerance keeps e.g. 0.3 / 0.1 at 3
    return int(math.floor(budget.units_per_step / cost + 1e-9))


def load_source(source: StreamSource) -> LabeledStream:
    if source.synthetic is not None:
        return generate(source.synthetic)
    return load_stream(source.features, source.labels)


def prepare_streams(cfg: ExperimentConfig,
                    stream: Optional[LabeledStream] = None) -> Tuple[LabeledStream, Optional[TestStream]]:
    """Training stream and aligned test stream (None when holdout_fraction is 0)."""
    if stream is None:
        stream = load_source(cfg.stream)
    if cfg.holdout_fraction == 0:
        return stream, None
    return split_holdout(stream, cfg.holdout_fraction, cfg.seed, cfg.protocol.batch_size)


def _label_head(labels: np.ndarray) -> List[List[int]]:
    values, counts = np.unique(labels, return_counts=True)
    order = np.lexsort((values, -counts))[:HISTOGRAM_HEAD]
    return [[int(values[i]), int(counts[i])] for i in order]


def _score(learner: Learner, stream: LabeledStream, start: int, stop: int) -> Tuple[int, int]:
    if not learner.ready:
        return 0, 0
    window = stream.slice(start, stop)
    return batch_accuracy(learner_predict(learner, window), window.labels)


def run_experiment(cfg: ExperimentConfig, learner: Optional[Learner] = None,
                   buffer: Optional[ReplayBuffer] = None,
                   stream: Optional[LabeledStream] = None
                   ) -> Tuple[List[StepRecord], Optional[RetentionReport], RunSummary]:
    """
    Run one experiment end to end.

    Args:
        cfg: Validated experiment config
        learner: Learner to use instead of building one from cfg.learner
        buffer: Replay buffer to use instead of a fresh one
        stream: Already loaded source stream (skips loading or generation)

    Returns:
        (step records, retention report or None without holdout, run summary)

    Raises:
        ExperimentError: Any failure inside the loop, tagged with its step
    """
    logger = get_run_logger()
    run_number = logger.log_effective_config(config_to_dict(cfg))
    started = time.perf_counter()

    train, test = prepare_streams(cfg, stream)
    protocol = cfg.protocol
    batch_size = protocol.batch_size
    init_rng = np.random.default_rng([cfg.seed, 0])
    sample_rng = np.random.default_rng([cfg.seed, 1])

    if learner is None:
        learner = build_learner(cfg.learner, train.num_classes, train.feature_dim, init_rng)
    if buffer is None:
        buffer = ReplayBuffer(train)
    elif buffer.stream is None:
        buffer.stream = train

    allowed = updates_allowed(cfg.budget, cfg.learner.kind)
    per_step = 1 if allowed == UNBOUNDED else allowed

    near = RunningAccuracy()
    online = RunningAccuracy()
    records: List[StepRecord] = []
    label_heads: List[List[List[int]]] = []

    for t in range(train.num_steps(batch_size)):
        try:
            batch = batch_at(train, t, batch_size)
            start, stop = int(batch.indices[0]), int(batch.indices[-1]) + 1

            window = eval_indices(t, protocol, train.length)
            correct = scored = 0
            evaluated = None
            if window is not None:
                evaluated = (window.start, window.stop)
                correct, scored = _score(learner, train, window.start, window.stop)
            near = update_running(near, correct, scored)

            # Online path: the step's own batch, same full-batch rule as the shifted range
            online_correct = online_scored = 0
            if stop - start == batch_size:
                online_correct, online_scored = _score(learner, train, start, stop)
            online = update_running(online, online_correct, online_scored)

            insert_batch(buffer, batch)
            learner_update(learner, buffer, cfg.sampler, per_step, batch_size, sample_rng,
                           batch.indices)
            if learner.last_update_count > per_step:
                raise ContractViolation(
                    f"learner performed {learner.last_update_count} updates, budget allows {per_step}"
                )
        except Exception as e:
            raise ExperimentError(t, e) from e

        records.append(StepRecord(
            step=t,
            trained_on=(start, stop),
            evaluated_range=evaluated,
            correct=correct,
            scored=scored,
            running_accuracy=near.value,
            updates=learner.last_update_count,
            online_correct=online_correct,
            online_scored=online_scored,
            online_accuracy=online.value,
        ))
        if logger.enabled:
            label_heads.append(_label_head(batch.labels))

    final_step = train.final_step(batch_size)
    retention = None
    if test is not None:
        try:
            if learner.ready:
                predictions = learner_predict(learner, test.features)
            else:
                predictions = np.zeros(test.length, dtype=np.int64)
            retention = backward_transfer(predictions, test, final_step)
        except Exception as e:
            raise ExperimentError(final_step, e) from e

    gap = None
    if near.value is not None and online.value is not None:
        gap = online.value - near.value

    summary = RunSummary(
        label=cfg.label,
        learner_kind=cfg.learner.kind,
        sampler=cfg.sampler.value,
        training=cfg.learner.training,
        batch_size=batch_size,
        shift=protocol.shift,
        seed=cfg.seed,
        steps=len(records),
        near_future_accuracy=near.value,
        near_future_scored=near.scored_count,
        online_accuracy=online.value,
        online_scored=online.scored_count,
        adaptation_gap=gap,
        bwt_at_T=None if retention is None else retention.bwt_at_T,
        retention_scored=0 if retention is None else retention.scored_count,
        updates_total=sum(record.updates for record in records),
        wall_time_seconds=time.perf_counter() - started,
    )
    logger.log_step_trace(run_number, (r.to_dict() for r in records), label_heads)
    return records, retention, summary


def _normalize_axes(axes: Axes) -> List[Tuple[str, List[Any]]]:
    pairs = list(axes.items()) if isinstance(axes, Mapping) else list(axes)
    if not pairs:
        raise ConfigError("sweep needs at least one axis")
    normalized = []
    for key, values in pairs:
        values = list(values)
        if not values:
            raise ConfigError(f"sweep axis {key!r} has no values")
        normalized.append((key, values))
    return normalized


def sweep_grid(axes: Axes) -> List[Dict[str, Any]]:
    """Cartesian product of the axes, first axis varying slowest."""
    normalized = _normalize_axes(axes)
    keys = [key for key, _ in normalized]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in normalized))]


def sampler_training_grid(base: ExperimentConfig) -> Dict[str, List[str]]:
    """Axes for the {fifo, uniform, mixed} x {head, full} sensitivity study."""
    if base.learner.kind not in ("er", "fc_only", "ace", "cosine_fc"):
        raise ConfigError(f"learner kind {base.learner.kind!r} has no sampler or training mode",
                          "learner.kind")
    return {"sampler": ["fifo", "uniform", "mixed"], "learner.training": ["head", "full"]}


def _run_point(base: ExperimentConfig, index: int, overrides: Dict[str, Any]) -> SweepOutcome:
    outcome = SweepOutcome(index=index, overrides=overrides)
    try:
        cfg = with_overrides(base, {**overrides, "seed": base.seed + index})
        if cfg.label is None or cfg.label == base.label:
            tag = ",".join(f"{k}={v}" for k, v in overrides.items())
            cfg = with_overrides(cfg, {"label": f"{base.label or 'sweep'}[{tag}]"})
        outcome.config = cfg
        outcome.records, outcome.retention, outcome.summary = run_experiment(cfg)
    except Exception as e:
        outcome.error = f"{type(e).__name__}: {e}"
        get_run_logger().log_sweep_failure(index, overrides, traceback.format_exc())
        print(f"⚠️  Warning: sweep point {index} ({overrides}) failed: {outcome.error}")
    return outcome


def run_sweep(base: ExperimentConfig, axes: Axes,
              max_workers: Optional[int] = None) -> List[SweepOutcome]:
    """
    Run one experiment per grid point.

    Args:
        base: Config every point starts from
        axes: Dotted config key -> values; the grid is their cartesian product
        max_workers: Threads running points concurrently (None or 1: sequential)

    Returns:
        One SweepOutcome per grid point, in grid order. A failing point carries
        its error and does not stop the others.
    """
    grid = sweep_grid(axes)
    if max_workers and max_workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            futures = [executor.submit(_run_point, base, i, point) for i, point in enumerate(grid)]
            return [future.result() for future in futures]
    return [_run_point(base, i, point) for i, point in enumerate(grid)]
