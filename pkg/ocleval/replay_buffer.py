"""
Unbounded replay storage and batch construction.

The buffer stores stream indices (references into the immutable stream), never
copies of the features, and never evicts. Batches come back as index arrays.
"""

from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np

from ocleval.errors import ConfigError, EmptyBufferError
from ocleval.stream_model import LabeledStream, SampleBatch


class SamplerKind(Enum):
    FIFO = "fifo"
    UNIFORM = "uniform"
    MIXED = "mixed"

    @classmethod
    def parse(cls, value: Union[str, "SamplerKind"]) -> "SamplerKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            choices = ", ".join(kind.value for kind in cls)
            raise ConfigError(f"unknown sampler {value!r} (choose from {choices})")


class ReplayBuffer:
    """Insertion-ordered store of stream indices."""

    def __init__(self, stream: Optional[LabeledStream] = None, initial_capacity: int = 1024):
        self.stream = stream
        self._entries = np.empty(max(1, initial_capacity), dtype=np.int64)
        self._size = 0

    @property
    def size(self) -> int:
        return self._size

    def __len__(self) -> int:
        return self._size

    @property
    def entries(self) -> np.ndarray:
        """Read-only view of the stored indices in insertion order."""
        view = self._entries[:self._size]
        view.setflags(write=False)
        return view

    def insert(self, indices: Iterable[int]) -> None:
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        needed = self._size + len(indices)
        if needed > len(self._entries):
            # amortized doubling
            grown = np.empty(max(needed, 2 * len(self._entries)), dtype=np.int64)
            grown[:self._size] = self._entries[:self._size]
            self._entries = grown
        self._entries[self._size:needed] = indices
        self._size = needed

    def labels(self) -> np.ndarray:
        """Labels of the stored samples, in insertion order."""
        if self.stream is None:
            raise ConfigError("buffer is not attached to a stream")
        return self.stream.labels[self.entries]

    def gather(self, indices: np.ndarray) -> SampleBatch:
        if self.stream is None:
            raise ConfigError("buffer is not attached to a stream")
        return self.stream.select(indices)


def insert_batch(buffer: ReplayBuffer, batch: Union[SampleBatch, Iterable[int]]) -> ReplayBuffer:
    """Append a batch (or bare indices) in stream order."""
    indices = batch.indices if isinstance(batch, SampleBatch) else batch
    buffer.insert(indices)
    return buffer


def _require_entries(buffer: ReplayBuffer) -> None:
    if buffer.size == 0:
        raise EmptyBufferError("cannot sample from an empty replay buffer")


def sample_fifo(buffer: ReplayBuffer, batch_size: int) -> np.ndarray:
    """The newest min(B, size) entries, oldest first."""
    _require_entries(buffer)
    take = min(batch_size, buffer.size)
    return buffer.entries[buffer.size - take:].copy()


def sample_uniform(buffer: ReplayBuffer, batch_size: int,
                   rng: np.random.Generator) -> np.ndarray:
    """min(B, size) entries drawn uniformly without replacement."""
    _require_entries(buffer)
    take = min(batch_size, buffer.size)
    positions = rng.choice(buffer.size, size=take, replace=False)
    return buffer.entries[positions]


def sample_mixed(buffer: ReplayBuffer, batch_size: int,
                 rng: np.random.Generator) -> np.ndarray:
    """ceil(B/2) newest entries followed by floor(B/2) uniform draws over all entries.

    The two halves are drawn independently and may share entries.
    """
    _require_entries(buffer)
    fifo_half = sample_fifo(buffer, (batch_size + 1) // 2)
    uniform_take = batch_size // 2
    if uniform_take == 0:
        return fifo_half
    uniform_half = sample_uniform(buffer, uniform_take, rng)
    return np.concatenate([fifo_half, uniform_half])


def sample(buffer: ReplayBuffer, kind: SamplerKind, batch_size: int,
           rng: np.random.Generator) -> np.ndarray:
    """Dispatch on the sampler kind."""
    if batch_size < 1:
        raise ConfigError(f"training batch size must be positive, got {batch_size}")
    if kind is SamplerKind.FIFO:
        return sample_fifo(buffer, batch_size)
    if kind is SamplerKind.UNIFORM:
        return sample_uniform(buffer, batch_size, rng)
    if kind is SamplerKind.MIXED:
        return sample_mixed(buffer, batch_size, rng)
    raise ConfigError(f"unknown sampler {kind!r}")
