"""Bounded, class-balanced store of labeled samples.

Eviction keeps the samples the classifier was least certain about when they
arrived: once a class is full, the unpinned entry with the highest recorded
degree of certainty leaves, preserving the widest intra-class spread.
Pinned entries (the initial training samples) are never evicted, so the
original templates cannot be forgotten.  Capacity is split evenly across
classes; by default each class gets floor(capacity / n_classes) slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class BufferEntry:
    features: np.ndarray
    label: int
    pinned: bool
    doc_at_insert: float

    def to_dict(self) -> dict:
        return {
            "features": self.features.tolist(),
            "label": self.label,
            "pinned": self.pinned,
            "doc_at_insert": self.doc_at_insert,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BufferEntry":
        return cls(
            features=np.asarray(payload["features"], dtype=np.float64),
            label=int(payload["label"]),
            pinned=bool(payload["pinned"]),
            doc_at_insert=float(payload["doc_at_insert"]),
        )


class LabeledBuffer:
    """Insertion-ordered sample store with per-class and total caps."""

    def __init__(self, n_classes: int, capacity: int = 170, per_class_cap: int | None = None):
        if n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if per_class_cap is None:
            per_class_cap = max(1, capacity // n_classes)
        if per_class_cap < 1:
            raise ValueError("per_class_cap must be >= 1")
        self.n_classes = int(n_classes)
        self.capacity = int(capacity)
        self.per_class_cap = int(per_class_cap)
        self.entries: list[BufferEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def class_count(self, label: int) -> int:
        return sum(1 for e in self.entries if e.label == label)

    def insert(self, features, label: int, doc_at_insert: float, pinned: bool = False) -> bool:
        """Add a sample, evicting within its class if a cap is hit.

        Returns False (and leaves the buffer unchanged) when the incoming
        sample's class is saturated with pinned entries only.  Among equal
        doc_at_insert values the oldest entry leaves first.
        """
        if not 0 <= label < self.n_classes:
            raise ValueError(f"label {label} outside [0, {self.n_classes})")
        if self.class_count(label) >= self.per_class_cap:
            if not self._evict_within_class(label):
                return False
        elif len(self.entries) >= self.capacity:
            # total overflow: make room inside the incoming sample's class
            if not self._evict_within_class(label):
                return False
        self.entries.append(
            BufferEntry(
                features=np.asarray(features, dtype=np.float64),
                label=int(label),
                pinned=bool(pinned),
                doc_at_insert=float(doc_at_insert),
            )
        )
        return True

    def _evict_within_class(self, label: int) -> bool:
        candidates = [i for i, e in enumerate(self.entries) if e.label == label and not e.pinned]
        if not candidates:
            return False
        victim = max(candidates, key=lambda i: self.entries[i].doc_at_insert)
        del self.entries[victim]
        return True

    def samples_and_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Stack the buffer into (X, y) arrays for classifier updates."""
        if not self.entries:
            raise ValueError("buffer is empty")
        X = np.stack([e.features for e in self.entries])
        y = np.asarray([e.label for e in self.entries], dtype=np.int64)
        return X, y

    def check_invariants(self) -> None:
        assert len(self.entries) <= self.capacity
        counts = np.zeros(self.n_classes, dtype=np.int64)
        for e in self.entries:
            counts[e.label] += 1
        assert counts.max(initial=0) <= self.per_class_cap

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "capacity": self.capacity,
            "per_class_cap": self.per_class_cap,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LabeledBuffer":
        buf = cls(
            n_classes=int(payload["n_classes"]),
            capacity=int(payload["capacity"]),
            per_class_cap=int(payload["per_class_cap"]),
        )
        buf.entries = [BufferEntry.from_dict(e) for e in payload["entries"]]
        return buf
