"""Label-only baseline: predicts the mode of the last K revealed labels for every sample."""

from collections import deque

import numpy as np

from ocleval.blind_calibration import BlindConfig, blind_predict
from ocleval.learners.base import Learner
from ocleval.replay_buffer import ReplayBuffer, SamplerKind


class BlindLearner(Learner):
    kind = "blind"

    def __init__(self, config: BlindConfig):
        super().__init__()
        self.config = config
        self.history = deque(maxlen=config.context_window)

    @property
    def ready(self) -> bool:
        return len(self.history) > 0

    def predict(self, features: np.ndarray) -> np.ndarray:
        label = blind_predict(list(self.history), self.config.context_window)
        return np.full(len(features), label, dtype=np.int64)

    def update(self, buffer: ReplayBuffer, sampler: SamplerKind, n_updates: int,
               batch_size: int, rng: np.random.Generator, incoming: np.ndarray) -> int:
        if len(incoming) == 0:
            return 0
        self.history.extend(buffer.stream.labels[incoming].tolist())
        return 1
