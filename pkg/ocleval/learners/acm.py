"""
Cosine kNN memory for the training-free ACM learner.

Stored vectors are unit-normalized float32 rows; similarities are computed in
float64 with an exact linear scan.
"""

from typing import Iterable, Optional

import numpy as np

from ocleval.errors import ConfigError, ContractViolation, EmptyMemoryError, NormalizationError
from ocleval.stream_model import SampleBatch


class AcmMemory:
    """Growable store of (unit feature vector, label) pairs."""

    def __init__(self, feature_dim: Optional[int] = None, k: int = 2, initial_capacity: int = 1024):
        if not isinstance(k, int) or k < 1:
            raise ConfigError(f"knn_k must be a positive integer, got {k!r}")
        self.k = k
        self.feature_dim = feature_dim
        self._capacity = max(1, initial_capacity)
        self._vectors: Optional[np.ndarray] = None
        self._labels = np.empty(self._capacity, dtype=np.int64)
        self._size = 0

    @property
    def size(self) -> int:
        return self._size

    def __len__(self) -> int:
        return self._size

    @property
    def vectors(self) -> np.ndarray:
        if self._vectors is None:
            return np.zeros((0, self.feature_dim or 0), dtype=np.float32)
        return self._vectors[:self._size]

    @property
    def labels(self) -> np.ndarray:
        return self._labels[:self._size]

    def _reserve(self, needed: int, feature_dim: int) -> None:
        if self._vectors is None:
            self._vectors = np.empty((self._capacity, feature_dim), dtype=np.float32)
        if needed <= len(self._labels):
            return
        capacity = max(needed, 2 * len(self._labels))
        vectors = np.empty((capacity, feature_dim), dtype=np.float32)
        vectors[:self._size] = self._vectors[:self._size]
        labels = np.empty(capacity, dtype=np.int64)
        labels[:self._size] = self._labels[:self._size]
        self._vectors, self._labels = vectors, labels

    def add(self, features: np.ndarray, labels: Iterable[int]) -> None:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        labels = np.asarray(list(labels), dtype=np.int64).reshape(-1)
        if len(features) != len(labels):
            raise ContractViolation(f"{len(features)} feature rows for {len(labels)} labels")
        if len(labels) == 0:
            return
        if self.feature_dim is None:
            self.feature_dim = features.shape[1]
        elif features.shape[1] != self.feature_dim:
            raise ContractViolation(
                f"feature vector has {features.shape[1]} entries, memory holds {self.feature_dim}"
            )

        norms = np.linalg.norm(features, axis=1)
        if np.any(norms == 0):
            raise NormalizationError("cannot store a zero-norm feature vector")
        units = (features / norms[:, None]).astype(np.float32)

        needed = self._size + len(labels)
        self._reserve(needed, self.feature_dim)
        self._vectors[self._size:needed] = units
        self._labels[self._size:needed] = labels
        self._size = needed


def acm_update(memory: AcmMemory, batch) -> AcmMemory:
    """Append a batch (SampleBatch, or a (features, labels) pair). No deduplication."""
    if isinstance(batch, SampleBatch):
        memory.add(batch.features, batch.labels)
    else:
        features, labels = batch
        memory.add(features, labels)
    return memory


def _vote(labels: np.ndarray) -> int:
    # labels are ordered nearest first; among tied vote counts the nearest label wins
    values, first_seen, counts = np.unique(labels, return_index=True, return_counts=True)
    top = counts.max()
    tied = first_seen[counts == top]
    return int(labels[tied.min()])


def _nearest(similarities: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k most similar entries, most similar first, earlier insertion on ties."""
    size = len(similarities)
    if size <= k:
        candidates = np.arange(size)
    else:
        kth = np.partition(similarities, size - k)[size - k]
        candidates = np.flatnonzero(similarities >= kth)
    order = np.lexsort((candidates, -similarities[candidates]))
    return candidates[order[:k]]


def acm_predict_batch(memory: AcmMemory, queries: np.ndarray) -> np.ndarray:
    """kNN labels for a batch of queries."""
    if memory.size == 0:
        raise EmptyMemoryError("kNN memory is empty")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if len(queries) == 0:
        return np.zeros(0, dtype=np.int64)
    if queries.shape[1] != memory.feature_dim:
        raise ContractViolation(
            f"query has {queries.shape[1]} entries, memory holds {memory.feature_dim}"
        )
    norms = np.linalg.norm(queries, axis=1)
    units = queries / np.where(norms > 0, norms, 1.0)[:, None]
    similarities = units @ memory.vectors.astype(np.float64).T

    stored_labels = memory.labels
    predictions = np.empty(len(queries), dtype=np.int64)
    for row in range(len(queries)):
        neighbours = _nearest(similarities[row], memory.k)
        predictions[row] = _vote(stored_labels[neighbours])
    return predictions


def acm_predict(memory: AcmMemory, x: np.ndarray) -> int:
    """
    Label of one query by majority vote of its k cosine-nearest stored vectors.

    Raises:
        EmptyMemoryError: If nothing has been stored yet
    """
    return int(acm_predict_batch(memory, np.asarray(x)[None, :])[0])
