"""ACM: a kNN memory that absorbs each incoming batch once and never trains."""

import numpy as np

from ocleval.learners.acm import AcmMemory, acm_predict_batch, acm_update
from ocleval.learners.base import Learner
from ocleval.replay_buffer import ReplayBuffer, SamplerKind


class AcmLearner(Learner):
    kind = "acm"

    def __init__(self, memory: AcmMemory):
        super().__init__()
        self.memory = memory

    @property
    def ready(self) -> bool:
        return self.memory.size > 0

    def predict(self, features: np.ndarray) -> np.ndarray:
        return acm_predict_batch(self.memory, features)

    def update(self, buffer: ReplayBuffer, sampler: SamplerKind, n_updates: int,
               batch_size: int, rng: np.random.Generator, incoming: np.ndarray) -> int:
        # n_updates and the sampler do not apply: one insertion per step
        if len(incoming) == 0:
            return 0
        acm_update(self.memory, buffer.gather(incoming))
        return 1
