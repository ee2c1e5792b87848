"""New-person protocol, comparison modes, and the usual metrics.

A dataset is split by subject into disjoint training, updating and testing
sets.  Three modes share the same initial fit and the same test set:

* ``co_updating``      - fit on TR, stream UPD unlabeled through the engine;
* ``supervised_updating`` - fit on TR, stream UPD with its true labels
  through the same buffer/update path (an upper bound for incremental);
* ``batch``            - fit once on TR + UPD, never update (upper bound
  for everything).

Test accuracy is recorded after every classifier-update event, giving the
per-mode accuracy trend alongside initial/final confusion matrices and
per-class precision/recall.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._util import derive_seed
from .buffer import LabeledBuffer
from .classifier import LinearSGDClassifier, SGDHyperparams
from .engine import ChannelState, CoUpdatingEngine, EngineConfig, compute_channel_weights
from .types import MultiModalSequence

MODES = ("co_updating", "supervised_updating", "batch")


@dataclass(frozen=True)
class Partition:
    """Subject-disjoint training / updating / testing split."""

    train: tuple[MultiModalSequence, ...]
    update: tuple[MultiModalSequence, ...]
    test: tuple[MultiModalSequence, ...]
    train_subjects: tuple[str, ...]
    update_subjects: tuple[str, ...]
    test_subjects: tuple[str, ...]


def partition_new_person(dataset, ratios=(0.2, 0.5, 0.3), seed: int = 0) -> Partition:
    """Random subject-level split at the given ratios (deterministic per seed)."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers summing to 1")
    dataset = list(dataset)
    subjects = sorted({seq.subject_id for seq in dataset})
    n = len(subjects)
    n_train = round(ratios[0] * n)
    n_update = round(ratios[1] * n)
    n_test = n - n_train - n_update
    if min(n_train, n_update, n_test) < 1:
        raise ValueError(f"{n} subjects are too few for ratios {ratios}")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [subjects[i] for i in order]
    train_set = frozenset(shuffled[:n_train])
    update_set = frozenset(shuffled[n_train : n_train + n_update])
    test_set = frozenset(shuffled[n_train + n_update :])
    return Partition(
        train=tuple(s for s in dataset if s.subject_id in train_set),
        update=tuple(s for s in dataset if s.subject_id in update_set),
        test=tuple(s for s in dataset if s.subject_id in test_set),
        train_subjects=tuple(sorted(train_set)),
        update_subjects=tuple(sorted(update_set)),
        test_subjects=tuple(sorted(test_set)),
    )


def confusion_matrix(truths, predictions, n_classes: int) -> np.ndarray:
    """Rows are true labels, columns predicted labels."""
    y = np.asarray(truths, dtype=np.int64)
    p = np.asarray(predictions, dtype=np.int64)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError("truths and predictions must be equal-length 1-D")
    if y.size and (min(y.min(), p.min()) < 0 or max(y.max(), p.max()) >= n_classes):
        raise ValueError(f"labels outside [0, {n_classes})")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (y, p), 1)
    return matrix


@dataclass(frozen=True)
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    macro_precision: float
    macro_recall: float


def precision_recall(matrix) -> ClassMetrics:
    """Per-class precision/recall plus unweighted macro averages (0/0 -> 0)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("confusion matrix must be square")
    if np.any(m < 0):
        raise ValueError("confusion matrix must be non-negative")
    tp = np.diag(m)
    predicted = m.sum(axis=0)
    actual = m.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    return ClassMetrics(
        precision=precision,
        recall=recall,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
    )


def accuracy_from_confusion(matrix) -> float:
    m = np.asarray(matrix, dtype=np.float64)
    total = m.sum()
    return float(np.trace(m) / total) if total > 0 else 0.0


@dataclass(frozen=True)
class EvalSnapshot:
    """Per-channel and fused test metrics at one point in time."""

    confusions: dict[str, np.ndarray]
    fused_confusion: np.ndarray
    metrics: dict[str, ClassMetrics]
    fused_metrics: ClassMetrics
    accuracies: dict[str, float]
    fused_accuracy: float


@dataclass(frozen=True)
class TrendPoint:
    update_count: int
    accuracies: dict[str, float]
    fused_accuracy: float


@dataclass(frozen=True)
class ExperimentConfig:
    engine: EngineConfig = EngineConfig()
    hyper: SGDHyperparams = SGDHyperparams()
    ratios: tuple[float, float, float] = (0.2, 0.5, 0.3)
    cv_folds: int = 4


@dataclass(frozen=True)
class ExperimentReport:
    mode: str
    seed: int
    n_classes: int
    channel_names: tuple[str, ...]
    initial: EvalSnapshot
    final: EvalSnapshot
    trend: tuple[TrendPoint, ...]
    update_count: int
    events: tuple[dict, ...]


class _TestSetEvaluator:
    """Caches test features so per-update trend evaluation stays cheap."""

    def __init__(self, test_sequences, n_classes: int):
        self.sequences = list(test_sequences)
        if any(s.true_label is None for s in self.sequences):
            raise ValueError("test sequences must be labeled")
        self.n_classes = n_classes
        self.names = sorted(self.sequences[0].channels)
        self.features = {
            name: np.stack([s.channels[name] for s in self.sequences]) for name in self.names
        }
        self.truths = np.asarray([s.true_label for s in self.sequences], dtype=np.int64)

    def _probabilities(self, classifiers, weights):
        fused_scores = np.zeros((len(self.sequences), self.n_classes))
        per_channel = {}
        for name in self.names:
            probs = classifiers[name].predict_proba_batch(self.features[name])
            per_channel[name] = probs
            fused_scores += probs * np.asarray(weights[name])[None, :]
        return per_channel, fused_scores

    def snapshot(self, classifiers, weights) -> EvalSnapshot:
        per_channel, fused_scores = self._probabilities(classifiers, weights)
        confusions = {}
        metrics = {}
        accuracies = {}
        for name in self.names:
            predicted = per_channel[name].argmax(axis=1)
            confusions[name] = confusion_matrix(self.truths, predicted, self.n_classes)
            metrics[name] = precision_recall(confusions[name])
            accuracies[name] = accuracy_from_confusion(confusions[name])
        fused_predicted = fused_scores.argmax(axis=1)
        fused_confusion = confusion_matrix(self.truths, fused_predicted, self.n_classes)
        return EvalSnapshot(
            confusions=confusions,
            fused_confusion=fused_confusion,
            metrics=metrics,
            fused_metrics=precision_recall(fused_confusion),
            accuracies=accuracies,
            fused_accuracy=accuracy_from_confusion(fused_confusion),
        )

    def trend_point(self, update_count: int, classifiers, weights) -> TrendPoint:
        per_channel, fused_scores = self._probabilities(classifiers, weights)
        accuracies = {
            name: float((per_channel[name].argmax(axis=1) == self.truths).mean())
            for name in self.names
        }
        fused = float((fused_scores.argmax(axis=1) == self.truths).mean())
        return TrendPoint(update_count=update_count, accuracies=accuracies, fused_accuracy=fused)


def _fit_channels(sequences, n_classes, config: ExperimentConfig, seed: int):
    names = sorted(sequences[0].channels)
    labels = np.asarray([s.true_label for s in sequences], dtype=np.int64)
    classifiers = {}
    weights = {}
    for idx, name in enumerate(names):
        X = np.stack([s.channels[name] for s in sequences])
        classifiers[name] = LinearSGDClassifier.fit(
            X, labels, n_classes=n_classes, hyper=config.hyper, seed=derive_seed(seed, 2, idx)
        )
        weights[name] = compute_channel_weights(
            sequences, name, n_classes=n_classes, folds=config.cv_folds,
            seed=derive_seed(seed, 3, idx), hyper=config.hyper,
        )
    return classifiers, weights


def run_experiment(dataset, mode: str, config: ExperimentConfig | None = None,
                   seed: int = 0) -> ExperimentReport:
    """One seeded pass of one mode: partition, fit, (maybe) update, evaluate."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    config = config if config is not None else ExperimentConfig()
    dataset = list(dataset)
    if any(s.true_label is None for s in dataset):
        raise ValueError("experiment datasets must carry true labels")
    n_classes = 1 + max(s.true_label for s in dataset)
    part = partition_new_person(dataset, ratios=config.ratios, seed=seed)

    fit_on = list(part.train) + list(part.update) if mode == "batch" else list(part.train)
    classifiers, weights = _fit_channels(fit_on, n_classes, config, seed)
    evaluator = _TestSetEvaluator(part.test, n_classes)
    initial = evaluator.snapshot(classifiers, weights)
    trend = [
        TrendPoint(
            update_count=0,
            accuracies=dict(initial.accuracies),
            fused_accuracy=initial.fused_accuracy,
        )
    ]

    if mode == "batch":
        return ExperimentReport(
            mode=mode, seed=seed, n_classes=n_classes,
            channel_names=tuple(evaluator.names),
            initial=initial, final=initial, trend=tuple(trend),
            update_count=0, events=(),
        )

    cap = config.engine.resolved_per_class_cap(n_classes)
    channels = {}
    for name in evaluator.names:
        buf = LabeledBuffer(n_classes, capacity=config.engine.buffer_max, per_class_cap=cap)
        for s in part.train:
            if not buf.insert(s.channels[name], s.true_label, doc_at_insert=0.0, pinned=True):
                raise ValueError("training split exceeds the per-class buffer budget")
        channels[name] = ChannelState(classifier=classifiers[name], weights=weights[name], buffer=buf)

    def on_update(engine: CoUpdatingEngine) -> None:
        trend.append(
            evaluator.trend_point(
                engine.update_count,
                {n: st.classifier for n, st in engine.channels.items()},
                {n: st.weights for n, st in engine.channels.items()},
            )
        )

    engine = CoUpdatingEngine(channels, n_classes, config=config.engine, on_update=on_update)
    stream_order = np.random.default_rng(derive_seed(seed, 1)).permutation(len(part.update))
    for i in stream_order:
        seq = part.update[i]
        if mode == "co_updating":
            engine.process_sequence(replace(seq, true_label=None))
        else:
            engine.supervised_update(seq, seq.true_label)

    final = evaluator.snapshot(
        {n: st.classifier for n, st in engine.channels.items()},
        {n: st.weights for n, st in engine.channels.items()},
    )
    return ExperimentReport(
        mode=mode, seed=seed, n_classes=n_classes,
        channel_names=tuple(evaluator.names),
        initial=initial, final=final, trend=tuple(trend),
        update_count=engine.update_count, events=tuple(engine.events),
    )


@dataclass(frozen=True)
class RepeatedReport:
    """Per-mode reports across repetitions plus mean/std of scalar metrics."""

    repetitions: int
    base_seed: int
    reports: dict[str, tuple[ExperimentReport, ...]]
    summary: dict[str, dict[str, tuple[float, float]]]


def _scalar_metrics(report: ExperimentReport) -> dict[str, float]:
    values: dict[str, float] = {}
    for stage_name, snapshot in (("initial", report.initial), ("final", report.final)):
        for name in report.channel_names:
            metrics = snapshot.metrics[name]
            values[f"{stage_name}.{name}.macro_precision"] = metrics.macro_precision
            values[f"{stage_name}.{name}.macro_recall"] = metrics.macro_recall
            values[f"{stage_name}.{name}.accuracy"] = snapshot.accuracies[name]
        values[f"{stage_name}.fused.macro_precision"] = snapshot.fused_metrics.macro_precision
        values[f"{stage_name}.fused.macro_recall"] = snapshot.fused_metrics.macro_recall
        values[f"{stage_name}.fused.accuracy"] = snapshot.fused_accuracy
    values["update_count"] = float(report.update_count)
    return values


def _run_one(args):
    dataset, mode, config, seed = args
    return run_experiment(dataset, mode, config=config, seed=seed)


def run_repeated(dataset, modes=MODES, repetitions: int = 7, base_seed: int = 0,
                 config: ExperimentConfig | None = None, jobs: int = 1) -> RepeatedReport:
    """Repeat every mode over ``repetitions`` seeded partitions and average.

    Partition seeds are base_seed + i, shared across modes so each
    repetition compares like with like.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
    config = config if config is not None else ExperimentConfig()
    tasks = [
        (mode, base_seed + i, (list(dataset), mode, config, base_seed + i))
        for mode in modes
        for i in range(repetitions)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, [t[2] for t in tasks]))
    else:
        results = [_run_one(t[2]) for t in tasks]

    reports: dict[str, list[ExperimentReport]] = {mode: [] for mode in modes}
    for (mode, _seed, _args), report in zip(tasks, results):
        reports[mode].append(report)

    summary: dict[str, dict[str, tuple[float, float]]] = {}
    for mode in modes:
        per_key: dict[str, list[float]] = {}
        for report in reports[mode]:
            for key, value in _scalar_metrics(report).items():
                per_key.setdefault(key, []).append(value)
        summary[mode] = {
            key: (float(np.mean(vals)), float(np.std(vals))) for key, vals in per_key.items()
        }
    return RepeatedReport(
        repetitions=repetitions,
        base_seed=base_seed,
        reports={mode: tuple(done) for mode, done in reports.items()},
        summary=summary,
    )
