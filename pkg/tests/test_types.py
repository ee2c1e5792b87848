import numpy as np
import pytest

from coupdate.types import (
    LabelSet,
    MultiModalSequence,
    Prediction,
    Thresholds,
    channel_dims,
    load_dataset,
    save_dataset,
)


class TestPrediction:
    def test_top2_and_doc(self):
        pred = Prediction.from_probs([0.6, 0.3, 0.1])
        assert pred.top1 == 0 and pred.top2 == 1
        assert abs(pred.doc - 0.5) <= 1e-12

    def test_tie_breaks_to_lower_class_id(self):
        pred = Prediction.from_probs([0.2, 0.4, 0.4])
        assert pred.top1 == 1 and pred.top2 == 2
        assert pred.doc == 0.0

    def test_equal_leaders_give_zero_doc(self):
        pred = Prediction.from_probs([0.5, 0.5, 0.0])
        assert pred.doc == 0.0

    def test_certain_prediction_gives_full_doc(self):
        pred = Prediction.from_probs([1.0, 0.0, 0.0])
        assert pred.doc == 1.0

    def test_validate_accepts_construction(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            raw = rng.random(5)
            pred = Prediction.from_probs(raw / raw.sum())
            pred.validate()

    def test_with_credibility(self):
        pred = Prediction.from_probs([0.7, 0.3]).with_credibility(0.21)
        assert pred.cre == 0.21

    @pytest.mark.parametrize(
        "bad",
        [
            [0.5, 0.6],            # sum != 1
            [1.2, -0.2],           # outside [0, 1]
            [np.nan, 1.0],         # non-finite
            [1.0],                 # single class
        ],
    )
    def test_rejects_bad_distributions(self, bad):
        with pytest.raises(ValueError):
            Prediction.from_probs(bad)


class TestThresholds:
    def test_defaults(self):
        t = Thresholds()
        assert (t.delta_cre, t.delta_close, t.delta_diff) == (0.35, 0.2, 0.2)

    def test_range_check(self):
        with pytest.raises(ValueError):
            Thresholds(delta_cre=1.5)
        with pytest.raises(ValueError):
            Thresholds(delta_diff=-0.1)

    def test_dict_round_trip(self):
        t = Thresholds(0.4, 0.1, 0.3)
        assert Thresholds.from_dict(t.to_dict()) == t


class TestLabelSet:
    def test_label_lookup(self):
        labels = LabelSet(3, names=("walk", "sit", "wave"))
        assert labels.label(1).name == "sit"
        assert len(labels) == 3

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            LabelSet(1)

    def test_names_must_match_size(self):
        with pytest.raises(ValueError):
            LabelSet(3, names=("a", "b"))

    def test_id_out_of_range(self):
        with pytest.raises(ValueError):
            LabelSet(3).label(3)


def _random_dataset(seed, n=12):
    rng = np.random.default_rng(seed)
    return [
        MultiModalSequence(
            sequence_id=f"s{i}",
            subject_id=f"p{i % 3}",
            channels={"rgb": rng.normal(size=5), "skel": rng.normal(size=3)},
            true_label=int(rng.integers(4)) if i % 4 else None,
        )
        for i in range(n)
    ]


class TestDatasetIO:
    def test_record_round_trip_is_identity(self):
        for seq in _random_dataset(0):
            assert MultiModalSequence.from_record(seq.to_record()) == seq

    def test_file_round_trip_bit_exact(self, tmp_path):
        data = _random_dataset(1)
        path = tmp_path / "data.jsonl"
        save_dataset(data, path)
        loaded = load_dataset(path)
        assert loaded == data
        for a, b in zip(loaded, data):
            for name in a.channels:
                assert a.channels[name].tolist() == b.channels[name].tolist()

    def test_rewrite_is_byte_identical(self, tmp_path):
        data = _random_dataset(2)
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        save_dataset(data, first)
        save_dataset(load_dataset(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_channel_dims(self):
        data = _random_dataset(3)
        assert channel_dims(data) == {"rgb": 5, "skel": 3}

    def test_missing_channel_rejected(self):
        data = _random_dataset(4)
        del data[5].channels["skel"]
        with pytest.raises(ValueError, match="missing configured channels"):
            channel_dims(data)

    def test_dimension_change_rejected(self):
        data = _random_dataset(5)
        data[3].channels["rgb"] = np.zeros(7)
        with pytest.raises(ValueError, match="changes dimension"):
            channel_dims(data)

    def test_non_finite_rejected(self):
        data = _random_dataset(6)
        data[0].channels["rgb"][2] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            channel_dims(data)
