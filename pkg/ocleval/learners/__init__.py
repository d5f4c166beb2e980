"""Online learners for ocleval.

This package contains the learner kinds an experiment can select, the head and
kNN kernels they are built on, and the registry that builds them from a
LearnerSpec.
"""

from typing import Callable, Dict, Optional

import numpy as np

from ocleval.blind_calibration import BlindConfig
from ocleval.errors import ConfigError

from .acm import AcmMemory, acm_predict, acm_predict_batch, acm_update
from .acm_learner import AcmLearner
from .base import (
    GRADIENT_KINDS,
    LEARNER_KINDS,
    Learner,
    LearnerSpec,
    learner_predict,
    learner_update,
)
from .blind_learner import BlindLearner
from .gradient_learner import GradientLearner
from .head import HeadMode, LinearHead, LossKind, SGDConfig, init_head

__all__ = [
    "AcmLearner",
    "AcmMemory",
    "BlindLearner",
    "GradientLearner",
    "LEARNER_KINDS",
    "Learner",
    "LearnerSpec",
    "acm_predict",
    "acm_update",
    "build_learner",
    "learner_predict",
    "learner_update",
]


def _gradient_learner(spec: LearnerSpec, num_classes: int, feature_dim: int,
                      rng: np.random.Generator) -> Learner:
    adapter_rank = None
    if spec.training == "full":
        adapter_rank = spec.adapter_rank if spec.adapter_rank is not None else feature_dim
        if adapter_rank > feature_dim:
            raise ConfigError(f"must be <= feature dimension {feature_dim}, got {adapter_rank}",
                              "learner.adapter_rank")
    head = init_head(num_classes, feature_dim, HeadMode(spec.head_mode), spec.gamma,
                     adapter_rank=adapter_rank, rng=rng)
    loss_kind = LossKind.ACE if spec.kind == "ace" else LossKind.CROSS_ENTROPY
    return GradientLearner(spec.kind, head, SGDConfig(spec.learning_rate, spec.weight_decay),
                           loss_kind)


def _acm_learner(spec: LearnerSpec, num_classes: int, feature_dim: int,
                 rng: np.random.Generator) -> Learner:
    return AcmLearner(AcmMemory(feature_dim, k=spec.knn_k))


def _blind_learner(spec: LearnerSpec, num_classes: int, feature_dim: int,
                   rng: np.random.Generator) -> Learner:
    return BlindLearner(BlindConfig(spec.context_window))


LEARNER_BUILDERS: Dict[str, Callable[..., Learner]] = {
    **{kind: _gradient_learner for kind in GRADIENT_KINDS},
    "acm": _acm_learner,
    "blind": _blind_learner,
}


def build_learner(spec: LearnerSpec, num_classes: int, feature_dim: int,
                  rng: Optional[np.random.Generator] = None) -> Learner:
    """
    Build a fresh learner for a run.

    Args:
        spec: Resolved learner spec
        num_classes: C, from the stream metadata
        feature_dim: d
        rng: Generator for the initial weights

    Returns:
        A Learner of spec.kind
    """
    if rng is None:
        rng = np.random.default_rng(0)
    try:
        builder = LEARNER_BUILDERS[spec.kind]
    except KeyError:
        raise ConfigError(f"unknown learner kind {spec.kind!r}", "learner.kind")
    return builder(spec, num_classes, feature_dim, rng)
