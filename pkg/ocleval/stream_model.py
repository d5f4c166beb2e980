"""
Stream data model for ocleval.

A stream is a temporally ordered sequence of (features, label) samples. The
arrays behind a stream are read-only once constructed, so streams can be shared
between concurrently running experiments.

On-disk formats:
    feature file  16-byte header (b"OCLF", version u32, N u32, d u32, all
                  little-endian) followed by N*d little-endian float32 values,
                  row-major.
    label file    JSON Lines, one {"index", "timestamp", "label"} record per
                  sample, optionally preceded by a {"num_classes": C} header.
"""

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np

from ocleval.errors import (
    ConfigError,
    ContractViolation,
    StepRangeError,
    StreamFormatError,
    StreamValidationError,
)

FEATURE_MAGIC = b"OCLF"
FEATURE_VERSION = 1
HEADER = struct.Struct("<4sIII")

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Sample:
    """One stream position: x_t, y_t and where it sits in time."""

    index: int
    timestamp: int
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class EvalProtocol:
    """Batch size B and evaluation shift S (in samples) of a test-then-train run."""

    batch_size: int = 64
    shift: int = 0

    def __post_init__(self):
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if not isinstance(self.shift, int) or self.shift < 0:
            raise ConfigError(f"shift must be a non-negative integer, got {self.shift!r}")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


class SampleBatch:
    """A contiguous or gathered selection of stream samples.

    Behaves as a sequence of Sample while exposing the underlying arrays for
    vectorized work.
    """

    def __init__(self, indices: np.ndarray, features: np.ndarray, labels: np.ndarray,
                 timestamps: np.ndarray):
        self.indices = indices
        self.features = features
        self.labels = labels
        self.timestamps = timestamps

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, position: int) -> Sample:
        return Sample(
            index=int(self.indices[position]),
            timestamp=int(self.timestamps[position]),
            features=self.features[position],
            label=int(self.labels[position]),
        )

    def __iter__(self) -> Iterator[Sample]:
        for position in range(len(self)):
            yield self[position]


class LabeledStream:
    """Temporally ordered, validated, immutable feature/label stream."""

    def __init__(self, features: np.ndarray, labels: np.ndarray,
                 timestamps: Optional[np.ndarray] = None,
                 num_classes: Optional[int] = None):
        features = np.asarray(features, dtype=np.float32)
        labels = np.asarray(labels)
        if features.ndim != 2:
            raise ContractViolation(f"features must be a 2-D array, got shape {features.shape}")
        if len(features) == 0:
            raise ContractViolation("a stream needs at least one sample")
        if labels.shape != (len(features),):
            raise ContractViolation(
                f"expected {len(features)} labels, got array of shape {labels.shape}"
            )
        if timestamps is None:
            timestamps = np.arange(len(features), dtype=np.int64)
        timestamps = np.asarray(timestamps, dtype=np.int64)
        if timestamps.shape != labels.shape:
            raise ContractViolation("timestamps and labels differ in length")

        labels = labels.astype(np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1
        _validate_records(features, labels, timestamps, num_classes)

        self.features = _frozen(features)
        self.labels = _frozen(labels)
        self.timestamps = _frozen(timestamps)
        self.num_classes = int(num_classes)

    @property
    def length(self) -> int:
        return len(self.labels)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, index: int) -> Sample:
        return Sample(
            index=int(index),
            timestamp=int(self.timestamps[index]),
            features=self.features[index],
            label=int(self.labels[index]),
        )

    @property
    def samples(self) -> Iterator[Sample]:
        for index in range(self.length):
            yield self[index]

    def num_steps(self, batch_size: int) -> int:
        return math.ceil(self.length / batch_size)

    def final_step(self, batch_size: int) -> int:
        """T: index of the last (possibly short) batch."""
        return self.num_steps(batch_size) - 1

    def select(self, indices: np.ndarray) -> SampleBatch:
        indices = np.asarray(indices, dtype=np.int64)
        return SampleBatch(indices, self.features[indices], self.labels[indices],
                           self.timestamps[indices])

    def slice(self, start: int, stop: int) -> SampleBatch:
        return SampleBatch(np.arange(start, stop, dtype=np.int64), self.features[start:stop],
                           self.labels[start:stop], self.timestamps[start:stop])


class TestStream(LabeledStream):
    """Held-out samples, each aligned to the training step it belongs to."""

    __test__ = False  # not a pytest collection target

    def __init__(self, features: np.ndarray, labels: np.ndarray, timestamps: np.ndarray,
                 num_classes: int, anchors: np.ndarray, batch_size: int = 1):
        super().__init__(features, labels, timestamps, num_classes)
        anchors = np.asarray(anchors, dtype=np.int64)
        if anchors.shape != self.labels.shape:
            raise ContractViolation("every test sample needs an anchor")
        if len(anchors) > 1 and np.any(np.diff(anchors) < 0):
            raise ContractViolation("test alignment must be non-decreasing")
        # anchors are positions in the compacted training stream
        self.anchors = _frozen(anchors)
        self.batch_size = batch_size
        self.step_of = _frozen(anchors // batch_size)


def _validate_records(features: np.ndarray, labels: np.ndarray, timestamps: np.ndarray,
                      num_classes: int) -> None:
    if num_classes < 1:
        raise ContractViolation(f"num_classes must be positive, got {num_classes}")

    finite_rows = np.isfinite(features).all(axis=1)
    if not finite_rows.all():
        bad = int(np.flatnonzero(~finite_rows)[0])
        raise StreamValidationError("non-finite feature value", bad)

    out_of_range = (labels < 0) | (labels >= num_classes)
    if out_of_range.any():
        bad = int(np.flatnonzero(out_of_range)[0])
        raise StreamValidationError(
            f"label {int(labels[bad])} outside [0, {num_classes})", bad
        )

    if len(timestamps) > 1:
        backwards = np.flatnonzero(np.diff(timestamps) < 0)
        if len(backwards):
            raise StreamValidationError("timestamp decreases", int(backwards[0]) + 1)
    if len(timestamps) and timestamps[0] < 0:
        raise StreamValidationError("negative timestamp", 0)


def batch_at(stream: LabeledStream, t: int, batch_size: int) -> SampleBatch:
    """
    Training batch of step t.

    Args:
        stream: The stream to slice
        t: Step index
        batch_size: B

    Returns:
        Samples with indices [t*B, min((t+1)*B, N)); the last batch may be short
    """
    if batch_size < 1:
        raise ContractViolation(f"batch size must be positive, got {batch_size}")
    start = t * batch_size
    if t < 0 or start >= stream.length:
        raise StepRangeError(
            f"step {t} is outside a stream of {stream.length} samples at batch size {batch_size}"
        )
    return stream.slice(start, min(start + batch_size, stream.length))


def eval_indices(t: int, protocol: EvalProtocol, length: int) -> Optional[range]:
    """
    Evaluation range of step t: the training range translated forward by S.

    Returns None when the translated range runs past the end of the stream;
    such steps are trained on but not scored.
    """
    start = t * protocol.batch_size
    if t < 0 or start >= length:
        raise StepRangeError(f"step {t} is outside a stream of {length} samples")
    lo = start + protocol.shift
    hi = lo + protocol.batch_size
    if hi > length:
        return None
    return range(lo, hi)


def save_stream(stream: LabeledStream, feature_path: PathLike, label_path: PathLike) -> None:
    """Write a stream in the binary feature + JSON Lines label formats."""
    feature_path = Path(feature_path)
    label_path = Path(label_path)

    with open(feature_path, "wb") as f:
        f.write(HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, stream.length, stream.feature_dim))
        f.write(np.ascontiguousarray(stream.features, dtype="<f4").tobytes())

    with open(label_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps({"num_classes": stream.num_classes}) + "\n")
        for index in range(stream.length):
            record = {
                "index": index,
                "timestamp": int(stream.timestamps[index]),
                "label": int(stream.labels[index]),
            }
            f.write(json.dumps(record) + "\n")


def _read_features(path: Path) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise StreamFormatError(f"cannot read feature file: {e}", str(path)) from e

    if len(raw) < HEADER.size:
        raise StreamFormatError("feature file shorter than its 16-byte header", str(path))
    magic, version, n, d = HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}, expected {FEATURE_MAGIC!r}", str(path))
    if version != FEATURE_VERSION:
        raise StreamFormatError(f"unsupported feature file version {version}", str(path))
    if n == 0 or d == 0:
        raise StreamFormatError(f"header declares an empty stream (N={n}, d={d})", str(path))

    expected = HEADER.size + 4 * n * d
    if len(raw) != expected:
        raise StreamFormatError(
            f"payload size mismatch: header promises {n}x{d} values "
            f"({expected} bytes), file has {len(raw)} bytes",
            str(path),
        )
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER.size, count=n * d)
    return values.reshape(n, d).astype(np.float32)


def _read_labels(path: Path) -> Tuple[List[dict], Optional[int]]:
    records = []
    declared = None
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise StreamFormatError(f"cannot read label file: {e}", str(path)) from e

    for line_number, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise StreamFormatError(f"line {line_number + 1}: invalid JSON ({e.msg})", str(path))
        if not isinstance(record, dict):
            raise StreamFormatError(f"line {line_number + 1}: expected a JSON object", str(path))

        # Header record: only allowed before any sample record
        if "num_classes" in record and "index" not in record:
            if records or declared is not None:
                raise StreamFormatError(
                    f"line {line_number + 1}: num_classes header must be the first line",
                    str(path),
                )
            declared = record["num_classes"]
            if not isinstance(declared, int) or isinstance(declared, bool) or declared < 1:
                raise StreamFormatError(
                    f"malformed header: num_classes must be a positive integer, got {declared!r}",
                    str(path),
                )
            continue

        missing = {"index", "timestamp", "label"} - set(record)
        if missing:
            raise StreamFormatError(
                f"line {line_number + 1}: missing fields {sorted(missing)}", str(path)
            )
        for key in ("index", "timestamp", "label"):
            value = record[key]
            if not isinstance(value, int) or isinstance(value, bool):
                raise StreamValidationError(f"{key} must be an integer, got {value!r}", len(records))
        records.append(record)
    return records, declared


def load_stream(feature_path: PathLike, label_path: PathLike) -> LabeledStream:
    """
    Load and validate a stream written by save_stream (or an external extractor).

    Args:
        feature_path: Binary feature file
        label_path: JSON Lines label file

    Returns:
        The validated stream. C is the declared num_classes when the label file
        has a header, otherwise 1 + the largest label.
    """
    feature_path = Path(feature_path)
    label_path = Path(label_path)
    features = _read_features(feature_path)
    records, declared = _read_labels(label_path)

    if len(records) != len(features):
        raise StreamValidationError(
            f"feature file holds {len(features)} samples but label file holds {len(records)}",
            min(len(records), len(features)),
        )
    for position, record in enumerate(records):
        if record["index"] != position:
            raise StreamValidationError(
                f"index {record['index']} out of order, expected {position}", position
            )

    labels = np.array([r["label"] for r in records], dtype=np.int64)
    timestamps = np.array([r["timestamp"] for r in records], dtype=np.int64)
    return LabeledStream(features, labels, timestamps, num_classes=declared)


def split_holdout(stream: LabeledStream, fraction: float, seed: int,
                  batch_size: int = 1) -> Tuple[LabeledStream, TestStream]:
    """
    Carve a test stream out of a training stream.

    floor(fraction * N) samples are held out. The stream is cut into that many
    contiguous strata of near-equal size and one sample of every stratum is moved,
    uniformly at random, to the test stream. Each test sample is aligned to the
    training step in which its neighbours are trained.

    Args:
        stream: Source stream
        fraction: Share of samples to hold out, in (0, 1)
        seed: Seed of the in-stratum offsets
        batch_size: B used to turn alignment positions into step indices

    Returns:
        (train stream with re-compacted indices, test stream)
    """
    if not isinstance(fraction, (int, float)) or not 0.0 < fraction < 1.0:
        raise ConfigError(f"holdout fraction must lie in (0, 1), got {fraction!r}")
    if fraction * stream.length < 1:
        raise ConfigError(
            f"holdout fraction {fraction} of {stream.length} samples leaves no test sample"
        )
    n_test = int(math.floor(fraction * stream.length + 1e-9))
    if n_test >= stream.length:
        raise ConfigError(f"holdout fraction {fraction} leaves no training data")

    bounds = (np.arange(n_test + 1, dtype=np.int64) * stream.length) // n_test
    rng = np.random.default_rng(seed)
    test_positions = rng.integers(bounds[:-1], bounds[1:])

    keep = np.ones(stream.length, dtype=bool)
    keep[test_positions] = False
    train_positions = np.flatnonzero(keep)

    # Training samples that precede each held-out sample in stream order
    anchors = test_positions - np.arange(n_test, dtype=np.int64)
    anchors = np.clip(anchors, 0, len(train_positions) - 1)

    train = LabeledStream(
        stream.features[train_positions],
        stream.labels[train_positions],
        stream.timestamps[train_positions],
        num_classes=stream.num_classes,
    )
    test = TestStream(
        stream.features[test_positions],
        stream.labels[test_positions],
        stream.timestamps[test_positions],
        num_classes=stream.num_classes,
        anchors=anchors,
        batch_size=batch_size,
    )
    return train, test
