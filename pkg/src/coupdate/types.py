"""Shared domain types: labels, sequences, predictions, thresholds.

Feature vectors are plain float64 numpy arrays; a multi-modal sequence maps
channel names to one feature vector each.  Everything here is a value type,
safe to copy and to send between threads.  Datasets are stored as JSON
lines, one record per sequence; floats survive the round trip bit-exactly
because json emits shortest-repr doubles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

ChannelId = str

PROB_ATOL = 1e-9


@dataclass(frozen=True)
class ActivityLabel:
    """One activity class: an integer id in [0, size), optionally named."""

    id: int
    name: str | None = None


@dataclass(frozen=True)
class LabelSet:
    """Closed set of activity classes shared by every channel in a run."""

    size: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"need at least 2 classes, got {self.size}")
        if self.names is not None and len(self.names) != self.size:
            raise ValueError("names must match the label set size")

    def label(self, class_id: int) -> ActivityLabel:
        if not 0 <= class_id < self.size:
            raise ValueError(f"class id {class_id} outside [0, {self.size})")
        return ActivityLabel(class_id, self.names[class_id] if self.names else None)

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class Thresholds:
    """Gate thresholds: minimum credibility, consensus closeness, and
    single-channel dominance margin."""

    delta_cre: float = 0.35
    delta_close: float = 0.2
    delta_diff: float = 0.2

    def __post_init__(self):
        for name in ("delta_cre", "delta_close", "delta_diff"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "delta_cre": self.delta_cre,
            "delta_close": self.delta_close,
            "delta_diff": self.delta_diff,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Thresholds":
        return cls(**payload)


@dataclass(frozen=True, eq=False)
class Prediction:
    """Class-probability distribution with its derived top-2 summary.

    ``doc`` (degree of certainty) is one minus the runner-up/top probability
    ratio; it is 0 when the two leaders tie and, by convention, when the top
    probability is 0.  ``cre`` (credibility) is doc scaled by the emitting
    channel's per-class weight; classifiers leave it at 0 and the engine
    fills it in once weights are known.
    """

    probs: np.ndarray
    top1: int
    top2: int
    doc: float
    cre: float = 0.0

    @classmethod
    def from_probs(cls, probs) -> "Prediction":
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.shape[0] < 2:
            raise ValueError("need a 1-D distribution over at least 2 classes")
        if not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(float(p.sum()) - 1.0) > PROB_ATOL:
            raise ValueError(f"probabilities sum to {float(p.sum())!r}, expected 1")
        order = np.argsort(-p, kind="stable")  # ties broken by lower class id
        c1, c2 = int(order[0]), int(order[1])
        doc = 1.0 - float(p[c2]) / float(p[c1]) if p[c1] > 0.0 else 0.0
        return cls(probs=p, top1=c1, top2=c2, doc=doc)

    def with_credibility(self, cre: float) -> "Prediction":
        return replace(self, cre=float(cre))

    def validate(self) -> None:
        """Re-check every invariant; raises AssertionError on violation."""
        p = self.probs
        assert abs(float(p.sum()) - 1.0) <= PROB_ATOL
        assert np.all(p >= 0.0) and np.all(p <= 1.0)
        assert p[self.top1] >= p[self.top2]
        others = np.delete(p, [self.top1, self.top2])
        assert others.size == 0 or p[self.top2] >= others.max()
        if p[self.top1] > 0.0:
            assert abs(self.doc - (1.0 - float(p[self.top2]) / float(p[self.top1]))) <= 1e-12
        else:
            assert self.doc == 0.0
        assert 0.0 <= self.doc <= 1.0
        assert 0.0 <= self.cre <= 1.0


@dataclass(eq=False)
class MultiModalSequence:
    """One activity clip: per-channel feature vectors plus identities.

    ``true_label`` rides along for evaluation and supervised baselines; the
    co-updating engine never reads it.
    """

    sequence_id: str
    subject_id: str
    channels: dict[ChannelId, np.ndarray]
    true_label: int | None = None

    def __post_init__(self):
        self.channels = {
            name: np.asarray(vec, dtype=np.float64) for name, vec in self.channels.items()
        }

    def __eq__(self, other):
        if not isinstance(other, MultiModalSequence):
            return NotImplemented
        return (
            self.sequence_id == other.sequence_id
            and self.subject_id == other.subject_id
            and self.true_label == other.true_label
            and set(self.channels) == set(other.channels)
            and all(np.array_equal(self.channels[k], other.channels[k]) for k in self.channels)
        )

    def to_record(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "subject_id": self.subject_id,
            "activity_id": self.true_label,
            "channels": {name: self.channels[name].tolist() for name in sorted(self.channels)},
        }

    @classmethod
    def from_record(cls, record: dict) -> "MultiModalSequence":
        label = record.get("activity_id")
        return cls(
            sequence_id=str(record["sequence_id"]),
            subject_id=str(record["subject_id"]),
            channels={name: np.asarray(vec, dtype=np.float64) for name, vec in record["channels"].items()},
            true_label=None if label is None else int(label),
        )


def channel_dims(sequences) -> dict[str, int]:
    """Validate a dataset and return the per-channel feature dimension.

    Checks that every sequence carries the same channel set, that vectors
    are 1-D and finite, and that each channel keeps one dimensionality.
    """
    sequences = list(sequences)
    if not sequences:
        raise ValueError("empty dataset")
    names = set(sequences[0].channels)
    dims: dict[str, int] = {}
    for seq in sequences:
        if set(seq.channels) != names:
            raise ValueError(f"sequence {seq.sequence_id!r} is missing configured channels")
        for name, vec in seq.channels.items():
            if vec.ndim != 1:
                raise ValueError(f"channel {name!r} of {seq.sequence_id!r} is not a flat vector")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"non-finite values in {seq.sequence_id!r}/{name}")
            if name in dims and dims[name] != vec.shape[0]:
                raise ValueError(
                    f"channel {name!r} changes dimension: {dims[name]} vs {vec.shape[0]}"
                )
            dims.setdefault(name, vec.shape[0])
    return dims


def save_dataset(sequences, path) -> None:
    """Write sequences as JSON lines (sorted keys, one record per line)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(json.dumps(seq.to_record(), sort_keys=True))
            fh.write("\n")


def load_dataset(path, validate: bool = True) -> list[MultiModalSequence]:
    sequences = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad dataset record: {exc}") from exc
            sequences.append(MultiModalSequence.from_record(record))
    if validate:
        channel_dims(sequences)
    return sequences
