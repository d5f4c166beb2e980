"""
Linear and cosine classification heads with analytic gradients.

A head maps a feature vector x to C logits:
    dot     z_c = w_c . h + b_c
    cosine  z_c = gamma * (w_c . h) / ((|w_c| + eps) (|h| + eps))
where h = A x when the head carries a feature adapter A (m x d), else h = x.
Training the adapter together with the head stands in for full-model training;
a head without adapter trains over frozen features (FC-only).

Parameters are stored in float32; every computation runs in float64 and is cast
back when parameters are written.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from ocleval.errors import ConfigError, ContractViolation

EPS = 1e-12


class HeadMode(Enum):
    DOT = "dot"
    COSINE = "cosine"


class LossKind(Enum):
    CROSS_ENTROPY = "ce"
    ACE = "ace"


@dataclass(frozen=True)
class SGDConfig:
    learning_rate: float = 0.005
    weight_decay: float = 1e-4

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if not self.weight_decay >= 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay!r}")


@dataclass(frozen=True)
class LinearHead:
    weights: np.ndarray
    bias: Optional[np.ndarray] = None
    mode: HeadMode = HeadMode.DOT
    gamma: float = 16.0
    adapter: Optional[np.ndarray] = None
    train_adapter: bool = True

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ContractViolation(f"weights must be C x m, got shape {self.weights.shape}")
        if self.mode is HeadMode.COSINE:
            if self.bias is not None:
                raise ContractViolation("cosine heads have no bias")
            if not self.gamma > 0:
                raise ContractViolation(f"cosine scale gamma must be > 0, got {self.gamma}")
        elif self.bias is not None and self.bias.shape != (self.weights.shape[0],):
            raise ContractViolation(f"bias must have {self.weights.shape[0]} entries")
        if self.adapter is not None and self.adapter.shape[0] != self.weights.shape[1]:
            raise ContractViolation(
                f"adapter rank {self.adapter.shape[0]} does not match head width "
                f"{self.weights.shape[1]}"
            )

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        if self.adapter is not None:
            return self.adapter.shape[1]
        return self.weights.shape[1]

    @property
    def trainable_dims(self) -> Union[str, Tuple[str, int]]:
        """"all" for a head over frozen features, ("subspace", m) with a trained adapter."""
        if self.adapter is not None and self.train_adapter:
            return ("subspace", self.adapter.shape[0])
        return "all"

    def astype(self, dtype) -> "LinearHead":
        """Copy with every parameter cast to dtype (float64 for gradient checks)."""
        return replace(
            self,
            weights=self.weights.astype(dtype),
            bias=None if self.bias is None else self.bias.astype(dtype),
            adapter=None if self.adapter is None else self.adapter.astype(dtype),
        )


@dataclass(frozen=True)
class HeadGradient:
    weights: np.ndarray
    bias: Optional[np.ndarray] = None
    adapter: Optional[np.ndarray] = None


def init_head(num_classes: int, feature_dim: int, mode: HeadMode = HeadMode.DOT,
              gamma: float = 16.0, adapter_rank: Optional[int] = None,
              rng: Optional[np.random.Generator] = None, scale: float = 0.01) -> LinearHead:
    """
    Fresh head with small random weights.

    Args:
        num_classes: C
        feature_dim: d
        mode: Dot or cosine logits
        gamma: Cosine scale
        adapter_rank: m for a trainable m x d adapter, None for frozen features
        rng: Generator for the weight draw
        scale: Standard deviation of the initial weights
    """
    if rng is None:
        rng = np.random.default_rng(0)
    width = feature_dim
    adapter = None
    if adapter_rank is not None:
        if not 1 <= adapter_rank <= feature_dim:
            raise ConfigError(f"adapter rank must lie in [1, {feature_dim}], got {adapter_rank}")
        width = adapter_rank
        # starts as a projection onto the first m coordinates
        adapter = np.eye(adapter_rank, feature_dim, dtype=np.float32)

    weights = (scale * rng.standard_normal((num_classes, width))).astype(np.float32)
    bias = np.zeros(num_classes, dtype=np.float32) if mode is HeadMode.DOT else None
    return LinearHead(weights=weights, bias=bias, mode=mode, gamma=gamma, adapter=adapter)


def _as_rows(head: LinearHead, x: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if rows.shape[-1] != head.feature_dim:
        raise ContractViolation(
            f"feature vector has {rows.shape[-1]} entries, head expects {head.feature_dim}"
        )
    if not np.isfinite(rows).all():
        raise ContractViolation("feature vector contains non-finite values")
    return rows


def _embed(head: LinearHead, rows: np.ndarray) -> np.ndarray:
    if head.adapter is None:
        return rows
    return rows @ head.adapter.astype(np.float64).T


def _logits(head: LinearHead, hidden: np.ndarray):
    weights = head.weights.astype(np.float64)
    if head.mode is HeadMode.DOT:
        logits = hidden @ weights.T
        if head.bias is not None:
            logits = logits + head.bias.astype(np.float64)
        return logits, None

    weight_norms = np.linalg.norm(weights, axis=1)
    hidden_norms = np.linalg.norm(hidden, axis=1)
    dots = hidden @ weights.T
    logits = head.gamma * dots / ((hidden_norms[:, None] + EPS) * (weight_norms[None, :] + EPS))
    return logits, (dots, weight_norms, hidden_norms)


def forward(head: LinearHead, x: np.ndarray) -> np.ndarray:
    """Logits for one feature vector (shape C) or a batch (shape n x C)."""
    rows = _as_rows(head, x)
    logits, _ = _logits(head, _embed(head, rows))
    return logits[0] if np.ndim(x) == 1 else logits


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _class_mask(num_classes: int, classes: Iterable[int]) -> np.ndarray:
    mask = np.zeros(num_classes, dtype=bool)
    classes = np.asarray(list(classes), dtype=np.int64)
    if len(classes) and (classes.min() < 0 or classes.max() >= num_classes):
        raise ContractViolation(f"present classes fall outside [0, {num_classes})")
    mask[classes] = True
    return mask


def _masked_cross_entropy(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray):
    """Per-row cross-entropy restricted to mask, and the restricted softmax.

    Plain cross-entropy is the all-True mask; both go through this one path.
    """
    n, num_classes = logits.shape
    if targets.min() < 0 or targets.max() >= num_classes:
        raise ContractViolation(f"label outside [0, {num_classes})")
    rows = np.arange(n)
    if not mask[rows, targets].all():
        raise ContractViolation("target class is masked out of the loss")

    restricted = np.where(mask, logits, -np.inf)
    top = restricted.max(axis=1)
    shifted = restricted - top[:, None]
    sum_exp = np.exp(shifted).sum(axis=1)
    log_sum = np.log(sum_exp)
    losses = log_sum + top - logits[rows, targets]
    probs = np.exp(shifted - log_sum[:, None])
    return losses, probs


def softmax_ce(logits: np.ndarray, y: int) -> float:
    """Max-shifted cross-entropy of one logit vector."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    if not np.isfinite(logits).all():
        raise ContractViolation("logits contain non-finite values")
    mask = np.ones(logits.shape, dtype=bool)
    losses, _ = _masked_cross_entropy(logits, np.array([y]), mask)
    return float(losses[0])


def ace_ce(logits: np.ndarray, y: int, present_classes: Iterable[int]) -> float:
    """Cross-entropy over the logits of the present classes only."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    mask = _class_mask(logits.shape[1], present_classes)[None, :]
    losses, _ = _masked_cross_entropy(logits, np.array([y]), mask)
    return float(losses[0])


def batch_loss_and_gradient(head: LinearHead, features: np.ndarray, targets: np.ndarray,
                            masks: Optional[np.ndarray] = None) -> Tuple[float, HeadGradient]:
    """
    Mean loss over a batch and its exact gradient.

    Args:
        head: Current head
        features: n x d batch
        targets: n labels
        masks: Optional n x C boolean class masks (ACE rows); None means plain CE

    Returns:
        (mean loss, gradient w.r.t. weights, bias and trainable adapter)
    """
    rows = _as_rows(head, features)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if len(targets) != len(rows):
        raise ContractViolation(f"{len(rows)} feature rows for {len(targets)} labels")
    n = len(rows)
    if masks is None:
        masks = np.ones((n, head.num_classes), dtype=bool)

    hidden = _embed(head, rows)
    logits, cache = _logits(head, hidden)
    losses, probs = _masked_cross_entropy(logits, targets, masks)

    dlogits = probs
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n

    weights = head.weights.astype(np.float64)
    grad_bias = None
    if head.mode is HeadMode.DOT:
        grad_weights = dlogits.T @ hidden
        if head.bias is not None:
            grad_bias = dlogits.sum(axis=0)
        grad_hidden = dlogits @ weights
    else:
        dots, weight_norms, hidden_norms = cache
        weight_den = weight_norms + EPS
        hidden_den = hidden_norms + EPS
        scaled = head.gamma * dlogits / (hidden_den[:, None] * weight_den[None, :])
        weighted = scaled * dots
        safe_weight_norms = np.where(weight_norms > 0, weight_norms, 1.0)
        safe_hidden_norms = np.where(hidden_norms > 0, hidden_norms, 1.0)
        grad_weights = scaled.T @ hidden - (
            weighted.sum(axis=0) / (weight_den * safe_weight_norms)
        )[:, None] * weights
        grad_hidden = scaled @ weights - (
            weighted.sum(axis=1) / (hidden_den * safe_hidden_norms)
        )[:, None] * hidden

    grad_adapter = None
    if head.adapter is not None and head.train_adapter:
        grad_adapter = grad_hidden.T @ rows

    gradient = HeadGradient(weights=grad_weights, bias=grad_bias, adapter=grad_adapter)
    return float(losses.mean()), gradient


def grad_ce(head: LinearHead, x: np.ndarray, y: int,
            loss_kind: LossKind = LossKind.CROSS_ENTROPY,
            present_classes: Optional[Iterable[int]] = None) -> HeadGradient:
    """Gradient of the selected loss for a single sample."""
    masks = None
    if loss_kind is LossKind.ACE:
        if present_classes is None:
            raise ContractViolation("ACE loss needs the set of present classes")
        masks = _class_mask(head.num_classes, present_classes)[None, :]
    _, gradient = batch_loss_and_gradient(head, np.atleast_2d(x), np.array([y]), masks)
    return gradient


def head_loss(head: LinearHead, features: np.ndarray, targets: np.ndarray,
              masks: Optional[np.ndarray] = None) -> float:
    """Mean loss only (used by finite-difference checks)."""
    rows = _as_rows(head, features)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if masks is None:
        masks = np.ones((len(rows), head.num_classes), dtype=bool)
    logits, _ = _logits(head, _embed(head, rows))
    losses, _ = _masked_cross_entropy(logits, targets, masks)
    return float(losses.mean())


def sgd_step(head: LinearHead, gradient: HeadGradient, cfg: SGDConfig) -> LinearHead:
    """
    One SGD step: w <- w - lr (g + wd w). The bias is not decayed; a frozen
    adapter is left untouched.
    """
    if gradient.weights.shape != head.weights.shape:
        raise ContractViolation(
            f"gradient shape {gradient.weights.shape} does not match weights {head.weights.shape}"
        )
    lr, wd = cfg.learning_rate, cfg.weight_decay
    dtype = head.weights.dtype

    weights = head.weights.astype(np.float64)
    weights = weights - lr * (gradient.weights + wd * weights)

    bias = head.bias
    if bias is not None and gradient.bias is not None:
        if gradient.bias.shape != bias.shape:
            raise ContractViolation("bias gradient shape mismatch")
        bias = (bias.astype(np.float64) - lr * gradient.bias).astype(dtype)

    adapter = head.adapter
    if adapter is not None and head.train_adapter and gradient.adapter is not None:
        if gradient.adapter.shape != adapter.shape:
            raise ContractViolation("adapter gradient shape mismatch")
        adapter64 = adapter.astype(np.float64)
        adapter = (adapter64 - lr * (gradient.adapter + wd * adapter64)).astype(dtype)

    return replace(head, weights=weights.astype(dtype), bias=bias, adapter=adapter)


def predict_labels(head: LinearHead, features: np.ndarray) -> np.ndarray:
    """Argmax of the logits; ties go to the smaller class id."""
    features = np.asarray(features)
    if features.ndim == 2 and len(features) == 0:
        return np.zeros(0, dtype=np.int64)
    logits = forward(head, np.atleast_2d(features))
    return np.argmax(logits, axis=1).astype(np.int64)
