"""The co-updating loop: one channel's reliable prediction updates them all.

Each channel owns an incremental classifier, a static per-class reliability
weight vector and a bounded labeled buffer.  For every incoming sequence
the gate turns per-channel predictions into credibilities (degree of
certainty times the predicted class's weight) and accepts a label either by
consensus (all channels agree, all credible, credibilities close together)
or by dominance (one credible channel sits clearly above the rest).
Accepted sequences enter every channel's buffer and trigger an incremental
update of every classifier; rejected sequences wait in an unlabeled queue
that is retried after each update.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import derive_seed, read_json, write_json
from .buffer import LabeledBuffer
from .classifier import LinearSGDClassifier, SGDHyperparams
from .types import MultiModalSequence, Prediction, Thresholds


def degree_of_certainty(probs) -> tuple[float, int, int]:
    """Top-2 summary of a distribution: (doc, best class, runner-up).

    doc = 1 - p[runner-up] / p[best]; ties between equal probabilities go
    to the lower class id, and an all-zero top probability yields doc = 0.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("need a 1-D distribution over at least 2 classes")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise ValueError("probabilities must be finite and non-negative")
    if abs(float(p.sum()) - 1.0) > 1e-8:
        raise ValueError(f"probabilities sum to {float(p.sum())!r}, expected 1")
    order = np.argsort(-p, kind="stable")
    c1, c2 = int(order[0]), int(order[1])
    doc = 1.0 - float(p[c2]) / float(p[c1]) if p[c1] > 0.0 else 0.0
    return doc, c1, c2


def credibility(doc: float, weight: float) -> float:
    """Weight a degree of certainty by the channel's per-class reliability."""
    if not 0.0 <= doc <= 1.0:
        raise ValueError(f"doc must lie in [0, 1], got {doc}")
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {weight}")
    return doc * weight


def gate_decision(
    classes,
    credibilities,
    thresholds: Thresholds,
    *,
    dominance_requires_disagreement: bool = False,
    scale_by_channels: bool = False,
) -> tuple[int | None, str]:
    """Decide a label from per-channel (top class, credibility) pairs.

    Consensus is checked first: every channel names the same class, every
    credibility clears delta_cre, and all credibilities lie within
    delta_close of each other.  Dominance second: some channel clears
    delta_cre and sits at least delta_diff away from every other channel's
    credibility; the most credible such channel wins (ties to the lowest
    channel index).  Dominance applies even when channels agree but miss
    the closeness bound, unless ``dominance_requires_disagreement`` is set.

    Returns (class id or None, branch in {"consensus", "dominance", "none"}).
    """
    cls_ids = [int(c) for c in classes]
    cre = [float(c) for c in credibilities]
    if not cls_ids or len(cls_ids) != len(cre):
        raise ValueError("classes and credibilities must be equal-length and non-empty")
    n = len(cre)
    d_cre, d_close, d_diff = thresholds.delta_cre, thresholds.delta_close, thresholds.delta_diff
    if scale_by_channels:
        # neutral for two channels, progressively more permissive beyond
        d_cre = d_cre * 2.0 / n
        d_close = d_close * n / 2.0
    agree = all(c == cls_ids[0] for c in cls_ids)
    if agree and min(cre) >= d_cre and max(cre) - min(cre) < d_close:
        return cls_ids[0], "consensus"
    if not (dominance_requires_disagreement and agree):
        candidates = [
            k
            for k in range(n)
            if cre[k] >= d_cre
            and all(abs(cre[k] - cre[i]) >= d_diff for i in range(n) if i != k)
        ]
        if candidates:
            best = max(candidates, key=lambda k: cre[k])
            return cls_ids[best], "dominance"
    return None, "none"


def fuse_predictions(predictions: dict[str, Prediction], weights: dict[str, np.ndarray]) -> Prediction:
    """Score-level fusion: weight each channel's distribution per class,
    sum over channels, renormalize.  All-zero mass falls back to uniform."""
    if not predictions:
        raise ValueError("no channel predictions to fuse")
    names = sorted(predictions)
    n_classes = predictions[names[0]].probs.shape[0]
    scores = np.zeros(n_classes)
    for name in names:
        p = predictions[name].probs
        w = np.asarray(weights[name], dtype=np.float64)
        if p.shape[0] != n_classes or w.shape[0] != n_classes:
            raise ValueError("channels disagree on the label set size")
        scores += w * p
    total = float(scores.sum())
    probs = scores / total if total > 0.0 else np.full(n_classes, 1.0 / n_classes)
    return Prediction.from_probs(probs)


def _fold_train_sides_cover(y: np.ndarray, fold_of: np.ndarray, folds: int, n_classes: int) -> bool:
    for f in range(folds):
        if np.unique(y[fold_of != f]).size != n_classes:
            return False
    return True


def _assign_folds(y: np.ndarray, subjects, n_classes: int, folds: int, seed: int) -> np.ndarray:
    """Subject-grouped folds when possible, class-stratified otherwise."""
    rng = np.random.default_rng([seed, 7])
    unique = sorted(set(subjects))
    if len(unique) >= folds:
        order = rng.permutation(len(unique))
        fold_of_subject = {unique[idx]: pos % folds for pos, idx in enumerate(order)}
        fold_of = np.asarray([fold_of_subject[s] for s in subjects], dtype=np.int64)
        if _fold_train_sides_cover(y, fold_of, folds, n_classes):
            return fold_of
    effective = min(folds, int(np.bincount(y, minlength=n_classes).min()))
    if effective < 2:
        raise ValueError("not enough samples per class to build >= 2 folds")
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    for c in range(n_classes):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = np.arange(idx.size) % effective
    return fold_of


def compute_channel_weights(
    training,
    channel: str,
    n_classes: int | None = None,
    folds: int = 4,
    seed: int = 0,
    hyper: SGDHyperparams | None = None,
) -> np.ndarray:
    """Per-class precision of one channel's classifier, estimated by
    cross-validation over the labeled training sequences.

    Folds group whole subjects together when there are enough distinct
    subjects; if grouping (or class scarcity) would leave some fold's
    training side without every class, assignment falls back to
    class-stratified folds, shrinking the fold count to the smallest class
    frequency.  A class the cross-validated models never predict gets
    weight 0.
    """
    seqs = list(training)
    if not seqs:
        raise ValueError("empty training set")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if any(s.true_label is None for s in seqs):
        raise ValueError("training sequences must be labeled")
    X = np.stack([s.channels[channel] for s in seqs])
    y = np.asarray([s.true_label for s in seqs], dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    counts = np.bincount(y, minlength=n_classes)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"classes absent from the training set: {missing.tolist()}")
    fold_of = _assign_folds(y, [s.subject_id for s in seqs], n_classes, folds, seed)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for f in range(int(fold_of.max()) + 1):
        held_out = fold_of == f
        model = LinearSGDClassifier.fit(
            X[~held_out], y[~held_out], n_classes=n_classes, hyper=hyper,
            seed=derive_seed(seed, 11, f),
        )
        predicted = model.predict_batch(X[held_out])
        np.add.at(confusion, (y[held_out], predicted), 1)
    true_positives = np.diag(confusion).astype(np.float64)
    predicted_totals = confusion.sum(axis=0).astype(np.float64)
    return np.divide(
        true_positives, predicted_totals, out=np.zeros(n_classes), where=predicted_totals > 0
    )


@dataclass(frozen=True)
class EngineConfig:
    thresholds: Thresholds = Thresholds()
    buffer_max: int = 170
    per_class_cap: int | None = None  # None -> floor(buffer_max / n_classes)
    max_retry_passes: int = 5
    dominance_requires_disagreement: bool = False
    scale_thresholds_by_channels: bool = False

    def resolved_per_class_cap(self, n_classes: int) -> int:
        if self.per_class_cap is not None:
            return self.per_class_cap
        return max(1, self.buffer_max // n_classes)

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds.to_dict(),
            "buffer_max": self.buffer_max,
            "per_class_cap": self.per_class_cap,
            "max_retry_passes": self.max_retry_passes,
            "dominance_requires_disagreement": self.dominance_requires_disagreement,
            "scale_thresholds_by_channels": self.scale_thresholds_by_channels,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EngineConfig":
        payload = dict(payload)
        payload["thresholds"] = Thresholds.from_dict(payload["thresholds"])
        return cls(**payload)


@dataclass(eq=False)
class ChannelState:
    """Everything one channel carries: classifier, weights, buffer."""

    classifier: LinearSGDClassifier
    weights: np.ndarray
    buffer: LabeledBuffer


@dataclass(frozen=True, eq=False)
class GateOutcome:
    label: int | None
    branch: str
    predictions: dict[str, Prediction] = field(repr=False)


class CoUpdatingEngine:
    """Single-writer state machine running the co-updating loop.

    ``process_sequence`` calls must be serialized; distinct engines may run
    in parallel.  ``on_update``, when set, is called with the engine after
    every classifier-update event (it is not serialized in checkpoints).
    """

    def __init__(self, channels: dict[str, ChannelState], n_classes: int,
                 config: EngineConfig | None = None, on_update=None):
        if not channels:
            raise ValueError("need at least one channel")
        self.config = config if config is not None else EngineConfig()
        self.n_classes = int(n_classes)
        self.channels = {name: channels[name] for name in sorted(channels)}
        for name, state in self.channels.items():
            if state.classifier.n_classes != self.n_classes or state.weights.shape != (self.n_classes,):
                raise ValueError(f"channel {name!r} disagrees on the label set size")
        self.unlabeled: list[MultiModalSequence] = []
        self.update_count = 0
        self.events: list[dict] = []
        self.on_update = on_update

    @classmethod
    def from_training(
        cls,
        training,
        n_classes: int | None = None,
        config: EngineConfig | None = None,
        hyper: SGDHyperparams | None = None,
        cv_folds: int = 4,
        seed: int = 0,
        on_update=None,
    ) -> "CoUpdatingEngine":
        """Fit per-channel classifiers on labeled sequences, estimate their
        per-class precision weights, and pin every training sample into the
        buffers so the initial templates can never be evicted."""
        seqs = list(training)
        if not seqs:
            raise ValueError("empty training set")
        if any(s.true_label is None for s in seqs):
            raise ValueError("training sequences must be labeled")
        labels = np.asarray([s.true_label for s in seqs], dtype=np.int64)
        if n_classes is None:
            n_classes = int(labels.max()) + 1
        config = config if config is not None else EngineConfig()
        cap = config.resolved_per_class_cap(n_classes)
        states = {}
        for idx, name in enumerate(sorted(seqs[0].channels)):
            X = np.stack([s.channels[name] for s in seqs])
            clf = LinearSGDClassifier.fit(
                X, labels, n_classes=n_classes, hyper=hyper, seed=derive_seed(seed, 2, idx)
            )
            weights = compute_channel_weights(
                seqs, name, n_classes=n_classes, folds=cv_folds,
                seed=derive_seed(seed, 3, idx), hyper=clf.hyper,
            )
            buf = LabeledBuffer(n_classes, capacity=config.buffer_max, per_class_cap=cap)
            for s in seqs:
                if not buf.insert(s.channels[name], s.true_label, doc_at_insert=0.0, pinned=True):
                    raise ValueError(
                        "training set exceeds the per-class buffer budget; "
                        "raise buffer_max or shrink the training set"
                    )
            states[name] = ChannelState(classifier=clf, weights=weights, buffer=buf)
        return cls(states, n_classes, config=config, on_update=on_update)

    # -- gate ------------------------------------------------------------

    def evaluate_gate(self, seq: MultiModalSequence) -> GateOutcome:
        """Predict on every channel and run the acceptance rules (pure)."""
        predictions: dict[str, Prediction] = {}
        for name, state in self.channels.items():
            pred = state.classifier.predict_proba(seq.channels[name])
            cre = credibility(pred.doc, float(state.weights[pred.top1]))
            predictions[name] = pred.with_credibility(cre)
        names = list(self.channels)
        label, branch = gate_decision(
            [predictions[n].top1 for n in names],
            [predictions[n].cre for n in names],
            self.config.thresholds,
            dominance_requires_disagreement=self.config.dominance_requires_disagreement,
            scale_by_channels=self.config.scale_thresholds_by_channels,
        )
        return GateOutcome(label=label, branch=branch, predictions=predictions)

    def assign_class_label(self, seq: MultiModalSequence) -> int | None:
        return self.evaluate_gate(seq).label

    # -- updating --------------------------------------------------------

    def process_sequence(self, seq: MultiModalSequence) -> GateOutcome:
        """One loop iteration: gate, then either queue or update everything."""
        outcome = self.evaluate_gate(seq)
        if outcome.label is None:
            self.unlabeled.append(seq)
            self._record(seq, "stream", outcome)
        else:
            self._apply_update(seq, outcome.label, outcome, "stream")
            self.retry_unlabeled()
        return outcome

    def supervised_update(self, seq: MultiModalSequence, label: int) -> None:
        """Baseline path: same buffer/update machinery, externally given label."""
        if not 0 <= label < self.n_classes:
            raise ValueError(f"label {label} outside [0, {self.n_classes})")
        predictions = {
            name: state.classifier.predict_proba(seq.channels[name])
            for name, state in self.channels.items()
        }
        outcome = GateOutcome(label=int(label), branch="supervised", predictions=predictions)
        self._apply_update(seq, int(label), outcome, "supervised")

    def retry_unlabeled(self) -> int:
        """Re-run the gate over the queue until a pass accepts nothing or
        the pass cap is reached.  Returns how many sequences were accepted."""
        total_accepted = 0
        for _ in range(self.config.max_retry_passes):
            if not self.unlabeled:
                break
            remaining: list[MultiModalSequence] = []
            accepted_this_pass = 0
            for seq in self.unlabeled:
                outcome = self.evaluate_gate(seq)
                if outcome.label is None:
                    remaining.append(seq)
                else:
                    self._apply_update(seq, outcome.label, outcome, "retry")
                    accepted_this_pass += 1
            self.unlabeled = remaining
            total_accepted += accepted_this_pass
            if accepted_this_pass == 0:
                break
        return total_accepted

    def _apply_update(self, seq: MultiModalSequence, label: int, outcome: GateOutcome, phase: str) -> None:
        for name, state in self.channels.items():
            state.buffer.insert(
                seq.channels[name], label,
                doc_at_insert=outcome.predictions[name].doc,
            )
        for state in self.channels.values():
            X, y = state.buffer.samples_and_labels()
            state.classifier.partial_fit(X, y)
        self.update_count += 1
        self._record(seq, phase, outcome)
        if self.on_update is not None:
            self.on_update(self)

    def _record(self, seq: MultiModalSequence, phase: str, outcome: GateOutcome) -> None:
        self.events.append(
            {
                "sequence_id": seq.sequence_id,
                "phase": phase,
                "decision": outcome.label,
                "branch": outcome.branch,
                "cre": {name: outcome.predictions[name].cre for name in self.channels},
                "buffer_sizes": {name: len(state.buffer) for name, state in self.channels.items()},
                "update_count": self.update_count,
            }
        )

    # -- fusion ----------------------------------------------------------

    def predict_fused(self, seq: MultiModalSequence) -> Prediction:
        predictions = {
            name: state.classifier.predict_proba(seq.channels[name])
            for name, state in self.channels.items()
        }
        return fuse_predictions(predictions, {n: s.weights for n, s in self.channels.items()})

    # -- persistence -----------------------------------------------------

    def write_event_log(self, path) -> None:
        """CSV log: one row per gate decision on a processed sequence plus
        one per retry acceptance and supervised update."""
        names = list(self.channels)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["sequence_id", "phase", "decision", "branch"]
                + [f"cre_{n}" for n in names]
                + [f"buffer_{n}" for n in names]
                + ["update_count"]
            )
            for event in self.events:
                decision = "none" if event["decision"] is None else str(event["decision"])
                writer.writerow(
                    [event["sequence_id"], event["phase"], decision, event["branch"]]
                    + [repr(event["cre"][n]) for n in names]
                    + [str(event["buffer_sizes"][n]) for n in names]
                    + [str(event["update_count"])]
                )

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "config": self.config.to_dict(),
            "update_count": self.update_count,
            "channels": {
                name: {
                    "classifier": state.classifier.to_dict(),
                    "weights": state.weights.tolist(),
                    "buffer": state.buffer.to_dict(),
                }
                for name, state in self.channels.items()
            },
            "unlabeled": [seq.to_record() for seq in self.unlabeled],
            "events": self.events,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CoUpdatingEngine":
        channels = {
            name: ChannelState(
                classifier=LinearSGDClassifier.from_dict(part["classifier"]),
                weights=np.asarray(part["weights"], dtype=np.float64),
                buffer=LabeledBuffer.from_dict(part["buffer"]),
            )
            for name, part in payload["channels"].items()
        }
        engine = cls(channels, int(payload["n_classes"]), config=EngineConfig.from_dict(payload["config"]))
        engine.unlabeled = [MultiModalSequence.from_record(r) for r in payload["unlabeled"]]
        engine.update_count = int(payload["update_count"])
        engine.events = [
            {**event, "decision": None if event["decision"] is None else int(event["decision"])}
            for event in payload["events"]
        ]
        return engine

    def save(self, path) -> None:
        write_json(self.to_dict(), path)

    @classmethod
    def load(cls, path) -> "CoUpdatingEngine":
        return cls.from_dict(read_json(path))
