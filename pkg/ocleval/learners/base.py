"""
Learner protocol shared by every learner kind, and the dispatch functions the
harness calls.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ocleval.errors import ConfigError
from ocleval.replay_buffer import ReplayBuffer, SamplerKind
from ocleval.stream_model import SampleBatch

LEARNER_KINDS = ("er", "fc_only", "ace", "acm", "cosine_fc", "blind")
GRADIENT_KINDS = ("er", "fc_only", "ace", "cosine_fc")
TRAINING_MODES = ("head", "full")


@dataclass(frozen=True)
class LearnerSpec:
    """Learner kind and hyperparameters, with kind defaults already resolved."""

    kind: str = "er"
    head_mode: str = "dot"
    gamma: float = 16.0
    learning_rate: float = 0.005
    weight_decay: float = 1e-4
    training: str = "full"
    adapter_rank: Optional[int] = None
    knn_k: int = 2
    context_window: int = 1

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ConfigError(f"unknown learner kind {self.kind!r} (choose from {', '.join(LEARNER_KINDS)})",
                              "learner.kind")
        if self.head_mode not in ("dot", "cosine"):
            raise ConfigError(f"head_mode must be 'dot' or 'cosine', got {self.head_mode!r}",
                              "learner.head_mode")
        if self.training not in TRAINING_MODES:
            raise ConfigError(f"training must be 'head' or 'full', got {self.training!r}",
                              "learner.training")
        if not self.gamma > 0:
            raise ConfigError(f"must be > 0, got {self.gamma!r}", "learner.gamma")
        if not self.learning_rate > 0:
            raise ConfigError(f"must be > 0, got {self.learning_rate!r}", "learner.learning_rate")
        if not self.weight_decay >= 0:
            raise ConfigError(f"must be >= 0, got {self.weight_decay!r}", "learner.weight_decay")
        if self.adapter_rank is not None and self.adapter_rank < 1:
            raise ConfigError(f"must be >= 1, got {self.adapter_rank!r}", "learner.adapter_rank")
        if self.knn_k < 1:
            raise ConfigError(f"must be >= 1, got {self.knn_k!r}", "learner.knn_k")
        if self.context_window < 1:
            raise ConfigError(f"must be >= 1, got {self.context_window!r}", "learner.context_window")


class Learner(ABC):
    """An online learner owned by a single experiment run."""

    kind = "base"

    def __init__(self):
        self.last_update_count = 0
        self.updates_total = 0

    @property
    def ready(self) -> bool:
        """False while the learner cannot predict yet (nothing revealed or stored)."""
        return True

    @abstractmethod
    def predict(self, features: np.ndarray) -> np.ndarray:
        """Labels for an n x d feature batch."""

    @abstractmethod
    def update(self, buffer: ReplayBuffer, sampler: SamplerKind, n_updates: int,
               batch_size: int, rng: np.random.Generator, incoming: np.ndarray) -> int:
        """Train on the buffer and return the number of updates performed."""


def learner_predict(learner: Learner, batch: Union[SampleBatch, np.ndarray]) -> np.ndarray:
    """Predicted labels for a batch; an empty batch gives an empty result."""
    features = batch.features if isinstance(batch, SampleBatch) else np.asarray(batch)
    if len(features) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.asarray(learner.predict(features), dtype=np.int64)


def learner_update(learner: Learner, buffer: ReplayBuffer, sampler: SamplerKind, n_updates: int,
                   batch_size: int, rng: np.random.Generator,
                   incoming: Optional[np.ndarray] = None) -> Learner:
    """
    Run one step's worth of training.

    Args:
        learner: Learner to train (mutated in place and returned)
        buffer: Replay buffer, already holding the incoming batch
        sampler: Replay batch construction
        n_updates: Budgeted number of updates
        batch_size: Training batch size B
        rng: Run generator used by the sampler
        incoming: Stream indices of this step's batch (default: the newest B entries)
    """
    if incoming is None:
        take = min(batch_size, buffer.size)
        incoming = buffer.entries[buffer.size - take:]
    performed = learner.update(buffer, sampler, n_updates, batch_size, rng,
                               np.asarray(incoming, dtype=np.int64))
    learner.last_update_count = performed
    learner.updates_total += performed
    return learner
