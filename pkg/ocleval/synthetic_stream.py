"""
Bursty synthetic streams with controllable label autocorrelation.

The stream is a concatenation of bursts. Every burst draws its class uniformly
at random (independently of the previous burst, so a class may repeat) and a
length from the burst law, then emits that many noisy copies of the class
prototype. Fixed-length bursts give closed-form ground truth for the blind
classifier, which the acceptance tests use as an oracle.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ocleval.errors import ConfigError, NormalizationError
from ocleval.stream_model import LabeledStream


@dataclass(frozen=True)
class BurstLaw:
    """Either Fixed(L) ("fixed") or Geometric(mean L) ("geometric")."""

    kind: str = "fixed"
    length: float = 16

    def __post_init__(self):
        if self.kind not in ("fixed", "geometric"):
            raise ConfigError(f"burst law must be 'fixed' or 'geometric', got {self.kind!r}")
        if not math.isfinite(self.length) or self.length < 1:
            raise ConfigError(f"burst length must be >= 1, got {self.length!r}")
        if self.kind == "fixed" and int(self.length) != self.length:
            raise ConfigError(f"fixed burst length must be an integer, got {self.length!r}")

    @property
    def is_fixed(self) -> bool:
        return self.kind == "fixed"

    def draw(self, rng: np.random.Generator) -> int:
        if self.is_fixed:
            return int(self.length)
        # numpy's geometric has support {1, 2, ...} and mean 1/p
        return int(rng.geometric(1.0 / self.length))


@dataclass(frozen=True)
class BurstSpec:
    num_classes: int
    feature_dim: int
    length: int
    burst_law: BurstLaw = BurstLaw()
    noise_sigma: float = 0.0
    drift_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.feature_dim < 1:
            raise ConfigError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.length < self.num_classes:
            raise ConfigError(
                f"length ({self.length}) must be at least num_classes ({self.num_classes})"
            )
        for name in ("noise_sigma", "drift_rate"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {value!r}")


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise NormalizationError("cannot normalize a zero vector")
    return matrix / norms


def initial_prototypes(spec: BurstSpec) -> np.ndarray:
    """Class prototypes as first drawn by generate() (before any drift)."""
    rng = np.random.default_rng(spec.seed)
    return _draw_prototypes(rng, spec)


def _draw_prototypes(rng: np.random.Generator, spec: BurstSpec) -> np.ndarray:
    raw = rng.standard_normal((spec.num_classes, spec.feature_dim))
    return _normalize_rows(raw)


def generate(spec: BurstSpec) -> LabeledStream:
    """
    Generate a bursty stream.

    Args:
        spec: Burst process parameters

    Returns:
        A LabeledStream of spec.length samples; deterministic given spec.seed
    """
    stream, _ = generate_with_prototypes(spec)
    return stream


def generate_with_prototypes(spec: BurstSpec) -> Tuple[LabeledStream, np.ndarray]:
    """Like generate(), also returning the final (post-drift) prototypes."""
    rng = np.random.default_rng(spec.seed)
    prototypes = _draw_prototypes(rng, spec)
    prototypes32 = prototypes.astype(np.float32)

    features = np.empty((spec.length, spec.feature_dim), dtype=np.float32)
    labels = np.empty(spec.length, dtype=np.int64)

    position = 0
    while position < spec.length:
        label = int(rng.integers(spec.num_classes))
        run = min(spec.burst_law.draw(rng), spec.length - position)
        end = position + run

        labels[position:end] = label
        if spec.noise_sigma > 0:
            noise = rng.standard_normal((run, spec.feature_dim))
            noisy = prototypes[label] + spec.noise_sigma * noise
            features[position:end] = _normalize_rows(noisy)
        else:
            # sigma = 0: exact prototype copies
            features[position:end] = prototypes32[label]

        if spec.drift_rate > 0:
            step = rng.standard_normal(spec.feature_dim)
            step = spec.drift_rate * step / np.linalg.norm(step)
            prototypes[label] = _normalize_rows(prototypes[label] + step)
            prototypes32[label] = prototypes[label].astype(np.float32)
        position = end

    stream = LabeledStream(features, labels, num_classes=spec.num_classes)
    return stream, prototypes


def expected_blind_accuracy(spec: BurstSpec, shift: int, context_window: int = 1) -> float:
    """
    Exact accuracy of the K=1 blind classifier at a given shift on Fixed(L) bursts.

    The label S+1 positions ahead lies in the same burst for L-S-1 of the L burst
    phases; otherwise it belongs to an independently drawn burst and matches with
    probability 1/C.

    Raises:
        NotImplementedError: For K > 1 or a non-fixed burst law (use Monte Carlo)
    """
    if context_window != 1 or not spec.burst_law.is_fixed:
        raise NotImplementedError(
            "closed form exists only for K=1 on fixed-length bursts; estimate by simulation"
        )
    if shift < 0:
        raise ConfigError(f"shift must be >= 0, got {shift}")
    burst = int(spec.burst_law.length)
    chance = 1.0 / spec.num_classes
    same_burst_phases = max(0, burst - shift - 1)
    return (same_burst_phases + (burst - same_burst_phases) * chance) / burst


def empirical_burst_lengths(labels: np.ndarray) -> np.ndarray:
    """Lengths of maximal runs of equal consecutive labels."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return np.zeros(0, dtype=np.int64)
    boundaries = np.flatnonzero(np.diff(labels) != 0) + 1
    edges = np.concatenate(([0], boundaries, [len(labels)]))
    return np.diff(edges)


def make_spec(num_classes: int, feature_dim: int, length: int, burst_length: float = 16,
              law: str = "fixed", noise_sigma: float = 0.0, drift_rate: float = 0.0,
              seed: Optional[int] = 0) -> BurstSpec:
    """Shorthand used by the CLI and tests."""
    return BurstSpec(
        num_classes=num_classes,
        feature_dim=feature_dim,
        length=length,
        burst_law=BurstLaw(law, burst_length),
        noise_sigma=noise_sigma,
        drift_rate=drift_rate,
        seed=0 if seed is None else seed,
    )
