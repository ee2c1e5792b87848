import numpy as np
import pytest

from coupdate.evaluation import (
    ExperimentConfig,
    MODES,
    accuracy_from_confusion,
    confusion_matrix,
    partition_new_person,
    precision_recall,
    run_experiment,
    run_repeated,
)
from coupdate.synth import ChannelSpec, StreamConfig, generate
from coupdate.types import MultiModalSequence


def _dataset(n_subjects=20, n_classes=3):
    rng = np.random.default_rng(0)
    return [
        MultiModalSequence(f"s{s}-{c}-{r}", f"subj{s:02d}", {"x": rng.normal(size=4)}, true_label=c)
        for s in range(n_subjects)
        for c in range(n_classes)
        for r in range(2)
    ]


class TestPartition:
    def test_twenty_subjects_split_4_10_6(self):
        part = partition_new_person(_dataset(20), seed=0)
        assert len(part.train_subjects) == 4
        assert len(part.update_subjects) == 10
        assert len(part.test_subjects) == 6
        assert len(part.train) == 4 * 6
        assert len(part.update) == 10 * 6
        assert len(part.test) == 6 * 6

    def test_ten_subjects_split_2_5_3(self):
        part = partition_new_person(_dataset(10), seed=3)
        assert (len(part.train_subjects), len(part.update_subjects), len(part.test_subjects)) == (2, 5, 3)

    def test_subject_disjointness(self):
        part = partition_new_person(_dataset(20), seed=11)
        groups = [set(part.train_subjects), set(part.update_subjects), set(part.test_subjects)]
        assert not (groups[0] & groups[1]) and not (groups[0] & groups[2]) and not (groups[1] & groups[2])
        for seqs, subjects in ((part.train, groups[0]), (part.update, groups[1]), (part.test, groups[2])):
            assert {s.subject_id for s in seqs} == subjects

    def test_deterministic_per_seed(self):
        a = partition_new_person(_dataset(20), seed=5)
        b = partition_new_person(_dataset(20), seed=5)
        assert a.train_subjects == b.train_subjects
        assert a.update_subjects == b.update_subjects
        c = partition_new_person(_dataset(20), seed=6)
        assert a.train_subjects != c.train_subjects or a.update_subjects != c.update_subjects

    def test_too_few_subjects_rejected(self):
        with pytest.raises(ValueError, match="too few"):
            partition_new_person(_dataset(2), seed=0)

    def test_bad_ratios_rejected(self):
        with pytest.raises(ValueError, match="ratios"):
            partition_new_person(_dataset(10), ratios=(0.5, 0.5, 0.5), seed=0)


class TestConfusionMatrix:
    def test_all_correct_is_diagonal(self):
        m = confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], 3)
        assert np.array_equal(m, np.diag([1, 2, 1]))

    def test_single_error_lands_row_true_column_predicted(self):
        m = confusion_matrix([1], [0], 2)
        assert m[1][0] == 1 and m.sum() == 1

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(4)
        truths = rng.integers(0, 6, size=500)
        preds = rng.integers(0, 6, size=500)
        m = confusion_matrix(truths, preds, 6)
        oracle = np.zeros((6, 6), dtype=np.int64)
        for t, p in zip(truths, preds):
            oracle[t][p] += 1
        assert np.array_equal(m, oracle)

    def test_out_of_range_labels_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            confusion_matrix([0, 3], [0, 1], 3)


class TestPrecisionRecall:
    def test_hand_computed_two_class_case(self):
        metrics = precision_recall([[5, 0], [2, 3]])
        assert abs(metrics.precision[0] - 5 / 7) <= 1e-12
        assert metrics.recall[0] == 1.0
        assert metrics.precision[1] == 1.0
        assert abs(metrics.recall[1] - 0.6) <= 1e-12
        assert abs(metrics.macro_precision - (5 / 7 + 1.0) / 2) <= 1e-12
        assert abs(metrics.macro_recall - 0.8) <= 1e-12

    def test_identity_matrix_is_perfect(self):
        metrics = precision_recall(np.eye(4) * 3)
        assert (metrics.precision == 1.0).all() and (metrics.recall == 1.0).all()

    def test_zero_over_zero_is_zero(self):
        metrics = precision_recall([[2, 0, 0], [1, 0, 0], [0, 0, 0]])
        assert metrics.precision[1] == 0.0 and metrics.precision[2] == 0.0
        assert metrics.recall[2] == 0.0

    def test_random_14x14_matches_count_oracle(self):
        rng = np.random.default_rng(5)
        m = rng.integers(0, 9, size=(14, 14))
        metrics = precision_recall(m)
        for c in range(14):
            tp = m[c][c]
            fp = sum(m[r][c] for r in range(14) if r != c)
            fn = sum(m[c][r] for r in range(14) if r != c)
            expected_p = tp / (tp + fp) if tp + fp else 0.0
            expected_r = tp / (tp + fn) if tp + fn else 0.0
            assert abs(metrics.precision[c] - expected_p) <= 1e-12
            assert abs(metrics.recall[c] - expected_r) <= 1e-12

    def test_accuracy_from_confusion(self):
        assert accuracy_from_confusion([[3, 1], [0, 4]]) == 7 / 8

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            precision_recall(np.zeros((2, 3)))


@pytest.fixture(scope="module")
def dataset():
    cfg = StreamConfig(
        n_classes=4, n_subjects=10, repetitions=2,
        channels={"a": ChannelSpec(dim=8, confusable_pairs=((0, 1),)),
                  "b": ChannelSpec(dim=8, confusable_pairs=((2, 3),))},
        class_separation=0.6, subject_offset_scale=0.3, noise_scale=0.1,
        confusable_scale=0.5, prototype_layout="orthogonal",
        style_in_fraction=0.25, seed=33,
    )
    return generate(cfg)


class TestRunExperiment:

    def test_batch_trend_has_exactly_one_point(self, dataset):
        report = run_experiment(dataset, "batch", seed=0)
        assert len(report.trend) == 1
        assert report.update_count == 0
        assert report.final is report.initial

    def test_co_and_supervised_share_identical_initial_state(self, dataset):
        co = run_experiment(dataset, "co_updating", seed=1)
        sup = run_experiment(dataset, "supervised_updating", seed=1)
        assert co.initial.fused_accuracy == sup.initial.fused_accuracy
        for name in co.channel_names:
            assert np.array_equal(co.initial.confusions[name], sup.initial.confusions[name])
        assert np.array_equal(co.initial.fused_confusion, sup.initial.fused_confusion)

    def test_supervised_updating_improves_on_initial(self, dataset):
        report = run_experiment(dataset, "supervised_updating", seed=1)
        # frozen from the seeded oracle run: 0.875 -> 1.0 fused accuracy
        assert report.final.fused_accuracy >= report.initial.fused_accuracy
        assert report.update_count == len(report.trend) - 1

    def test_trend_counts_update_events(self, dataset):
        report = run_experiment(dataset, "co_updating", seed=1)
        assert report.trend[0].update_count == 0
        assert [p.update_count for p in report.trend] == list(range(report.update_count + 1))

    def test_unknown_mode_rejected(self, dataset):
        with pytest.raises(ValueError, match="mode"):
            run_experiment(dataset, "offline")

    def test_unlabeled_dataset_rejected(self, dataset):
        stripped = [MultiModalSequence(s.sequence_id, s.subject_id, s.channels) for s in dataset[:40]]
        with pytest.raises(ValueError, match="labels"):
            run_experiment(stripped, "batch")


class TestRunRepeated:
    def test_single_repetition_equals_run_experiment(self, dataset):
        repeated = run_repeated(dataset, modes=("batch",), repetitions=1, base_seed=2)
        single = run_experiment(dataset, "batch", seed=2)
        key = "initial.fused.macro_precision"
        mean, std = repeated.summary["batch"][key]
        assert mean == single.initial.fused_metrics.macro_precision
        assert std == 0.0

    def test_summary_is_mean_and_std_of_report_scalars(self, dataset):
        repeated = run_repeated(dataset, modes=("batch",), repetitions=3, base_seed=0)
        values = [r.initial.fused_accuracy for r in repeated.reports["batch"]]
        mean, std = repeated.summary["batch"]["initial.fused.accuracy"]
        assert abs(mean - np.mean(values)) <= 1e-15
        assert abs(std - np.std(values)) <= 1e-15

    def test_parallel_jobs_match_serial(self, dataset):
        serial = run_repeated(dataset, modes=("batch",), repetitions=2, base_seed=0, jobs=1)
        parallel = run_repeated(dataset, modes=("batch",), repetitions=2, base_seed=0, jobs=2)
        assert serial.summary == parallel.summary

    def test_modes_validated(self, dataset):
        with pytest.raises(ValueError, match="unknown mode"):
            run_repeated(dataset, modes=("nope",), repetitions=1)

    def test_all_modes_present(self):
        assert MODES == ("co_updating", "supervised_updating", "batch")
