"""
Replay-trained head learners: ER, FC-only, ACE and CosineFC.

All four share one training loop; they differ in head mode, in whether the
feature adapter trains, and in the loss applied to incoming samples.
"""

from typing import Optional

import numpy as np

from ocleval.learners.base import Learner
from ocleval.learners.head import (
    LinearHead,
    LossKind,
    SGDConfig,
    batch_loss_and_gradient,
    predict_labels,
    sgd_step,
)
from ocleval.replay_buffer import ReplayBuffer, SamplerKind, sample


class GradientLearner(Learner):
    """SGD on replayed batches, n_updates times per step."""

    def __init__(self, kind: str, head: LinearHead, sgd: SGDConfig,
                 loss_kind: LossKind = LossKind.CROSS_ENTROPY):
        super().__init__()
        self.kind = kind
        self.head = head
        self.sgd = sgd
        self.loss_kind = loss_kind
        self.last_loss: Optional[float] = None

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict_labels(self.head, features)

    def _masks(self, buffer: ReplayBuffer, drawn: np.ndarray,
               incoming: np.ndarray) -> Optional[np.ndarray]:
        if self.loss_kind is not LossKind.ACE:
            return None
        masks = np.ones((len(drawn), self.head.num_classes), dtype=bool)
        from_incoming = np.isin(drawn, incoming)
        if from_incoming.any():
            present = np.zeros(self.head.num_classes, dtype=bool)
            present[buffer.stream.labels[incoming]] = True
            masks[from_incoming] = present
        return masks

    def update(self, buffer: ReplayBuffer, sampler: SamplerKind, n_updates: int,
               batch_size: int, rng: np.random.Generator, incoming: np.ndarray) -> int:
        for _ in range(n_updates):
            drawn = sample(buffer, sampler, batch_size, rng)
            batch = buffer.gather(drawn)
            masks = self._masks(buffer, drawn, incoming)
            self.last_loss, gradient = batch_loss_and_gradient(
                self.head, batch.features, batch.labels, masks
            )
            self.head = sgd_step(self.head, gradient, self.sgd)
        return n_updates
