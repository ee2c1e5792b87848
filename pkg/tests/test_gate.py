import numpy as np
import pytest

from coupdate.engine import credibility, degree_of_certainty, fuse_predictions, gate_decision
from coupdate.types import Prediction, Thresholds


class TestDegreeOfCertainty:
    def test_plain_distribution(self):
        doc, c1, c2 = degree_of_certainty([0.6, 0.3, 0.1])
        assert abs(doc - 0.5) <= 1e-12
        assert (c1, c2) == (0, 1)

    def test_equal_leaders(self):
        doc, c1, c2 = degree_of_certainty([0.5, 0.5, 0.0])
        assert doc == 0.0
        assert (c1, c2) == (0, 1)

    def test_zero_runner_up(self):
        doc, _, _ = degree_of_certainty([1.0, 0.0, 0.0])
        assert doc == 1.0

    def test_non_normalized_rejected(self):
        with pytest.raises(ValueError, match="sum"):
            degree_of_certainty([0.5, 0.2])


class TestCredibility:
    def test_product(self):
        assert abs(credibility(0.5, 0.7) - 0.35) <= 1e-12

    def test_zero_weight_annihilates(self):
        assert credibility(0.73, 0.0) == 0.0

    def test_identity(self):
        assert credibility(1.0, 1.0) == 1.0

    def test_range_checked(self):
        with pytest.raises(ValueError):
            credibility(1.2, 0.5)
        with pytest.raises(ValueError):
            credibility(0.5, -0.1)


def _naive_gate(classes, cres, thresholds):
    """Literal transcription of the two acceptance rules, loop by loop."""
    n = len(classes)
    consensus = True
    for i in range(n):
        for j in range(n):
            if classes[i] != classes[j]:
                consensus = False
    if consensus:
        ok = True
        for i in range(n):
            if not cres[i] >= thresholds.delta_cre:
                ok = False
        for i in range(n):
            for j in range(n):
                if not abs(cres[i] - cres[j]) < thresholds.delta_close:
                    ok = False
        if ok:
            return classes[0], "consensus"
    best = None
    for k in range(n):
        if cres[k] >= thresholds.delta_cre:
            dominant = True
            for i in range(n):
                if i != k and not abs(cres[k] - cres[i]) >= thresholds.delta_diff:
                    dominant = False
            if dominant and (best is None or cres[k] > cres[best]):
                best = k
    if best is not None:
        return classes[best], "dominance"
    return None, "none"


class TestGateExamples:
    def test_agreeing_close_credible_pair(self):
        assert gate_decision([2, 2], [0.40, 0.50], Thresholds()) == (2, "consensus")

    def test_disagreeing_dominant_channel(self):
        assert gate_decision([1, 3], [0.60, 0.30], Thresholds()) == (1, "dominance")

    def test_disagreeing_close_pair_rejected(self):
        assert gate_decision([1, 3], [0.50, 0.40], Thresholds()) == (None, "none")

    def test_agreeing_but_distant_pair_accepted_by_dominance(self):
        assert gate_decision([2, 2], [0.75, 0.40], Thresholds()) == (2, "dominance")

    def test_disagreement_flag_blocks_that_edge_case(self):
        label, branch = gate_decision(
            [2, 2], [0.75, 0.40], Thresholds(), dominance_requires_disagreement=True
        )
        assert (label, branch) == (None, "none")
        # plain disagreement still passes through dominance
        assert gate_decision(
            [1, 3], [0.60, 0.30], Thresholds(), dominance_requires_disagreement=True
        ) == (1, "dominance")

    def test_single_channel_needs_only_credibility(self):
        assert gate_decision([4], [0.36], Thresholds()) == (4, "consensus")
        assert gate_decision([4], [0.34], Thresholds()) == (None, "none")

    def test_three_channels_highest_dominant_wins(self):
        assert gate_decision([0, 1, 2], [0.9, 0.1, 0.4], Thresholds()) == (0, "dominance")

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            gate_decision([], [], Thresholds())

    def test_scaling_is_neutral_for_two_channels(self):
        grid = np.linspace(0.0, 1.0, 11)
        for a in grid:
            for b in grid:
                plain = gate_decision([1, 1], [a, b], Thresholds())
                scaled = gate_decision([1, 1], [a, b], Thresholds(), scale_by_channels=True)
                assert plain == scaled


class TestGateMatchesNaiveRule:
    def test_exhaustive_two_channel_grid(self):
        thresholds = Thresholds()
        grid = [round(0.1 * i, 1) for i in range(11)]
        for agree in (True, False):
            classes = [2, 2] if agree else [2, 5]
            for a in grid:
                for b in grid:
                    assert gate_decision(classes, [a, b], thresholds) == _naive_gate(
                        classes, [a, b], thresholds
                    )

    def test_random_tuples_many_channels(self):
        rng = np.random.default_rng(13)
        for _ in range(100_000):
            n = int(rng.integers(1, 5))
            classes = rng.integers(0, 3, size=n).tolist()
            cres = np.round(rng.random(n), 3).tolist()
            thresholds = Thresholds(
                delta_cre=round(float(rng.random()), 2),
                delta_close=round(float(rng.random()), 2),
                delta_diff=round(float(rng.random()), 2),
            )
            assert gate_decision(classes, cres, thresholds) == _naive_gate(classes, cres, thresholds)


class TestFusePredictions:
    def test_single_channel_keeps_argmax(self):
        pred = Prediction.from_probs([0.1, 0.7, 0.2])
        fused = fuse_predictions({"a": pred}, {"a": np.array([0.5, 0.5, 0.5])})
        assert fused.top1 == pred.top1

    def test_identical_inputs_are_a_fixed_point(self):
        pred = Prediction.from_probs([0.25, 0.25, 0.5])
        fused = fuse_predictions(
            {"a": pred, "b": pred}, {"a": np.ones(3), "b": np.ones(3)}
        )
        np.testing.assert_allclose(fused.probs, pred.probs, atol=1e-12)

    def test_weighted_sum_oracle(self):
        pa = Prediction.from_probs([0.6, 0.4])
        pb = Prediction.from_probs([0.3, 0.7])
        fused = fuse_predictions(
            {"a": pa, "b": pb}, {"a": np.ones(2), "b": np.ones(2)}
        )
        expected = np.array([0.9, 1.1]) / 2.0  # direct arithmetic
        np.testing.assert_allclose(fused.probs, expected, atol=1e-12)
        assert fused.top1 == 1

    def test_per_class_weights_shift_the_argmax(self):
        pa = Prediction.from_probs([0.55, 0.45])
        pb = Prediction.from_probs([0.45, 0.55])
        fused = fuse_predictions(
            {"a": pa, "b": pb}, {"a": np.array([0.1, 0.1]), "b": np.array([1.0, 1.0])}
        )
        assert fused.top1 == 1

    def test_all_zero_weights_fall_back_to_uniform(self):
        pred = Prediction.from_probs([0.9, 0.1])
        fused = fuse_predictions({"a": pred}, {"a": np.zeros(2)})
        np.testing.assert_array_equal(fused.probs, [0.5, 0.5])

    def test_empty_channel_map_rejected(self):
        with pytest.raises(ValueError, match="no channel"):
            fuse_predictions({}, {})

    def test_label_set_mismatch_rejected(self):
        pa = Prediction.from_probs([0.6, 0.4])
        pb = Prediction.from_probs([0.3, 0.3, 0.4])
        with pytest.raises(ValueError, match="label set"):
            fuse_predictions({"a": pa, "b": pb}, {"a": np.ones(2), "b": np.ones(3)})
