import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ew_psds.exceptions import UnknownClip, VocabularyMismatch
from ew_psds.matching import counts_to_tsv, intersection, match_operating_point
from ew_psds.schemas.core import Event
from ew_psds.schemas.scoring import MatchCounts, MatchCriteria
from tests.conftest import make_clipset


def event(onset: float, offset: float, label: str = "A") -> Event:
    return Event(onset=onset, offset=offset, label=label)


# ---------------------------------------------------------------------------
# intersection
# ---------------------------------------------------------------------------
class TestIntersection:
    @pytest.mark.parametrize(
        "a, b, expected",
        [
            ((0, 2), (0.5, 2.5), 1.5),
            ((0, 1), (1, 2), 0.0),
            ((0, 2), (0, 2), 2.0),
            ((0, 1), (3, 4), 0.0),
        ],
    )
    def test_examples(self, a, b, expected):
        assert intersection(event(*a), event(*b)) == expected
        assert intersection(event(*b), event(*a)) == expected


# ---------------------------------------------------------------------------
# match_operating_point
# ---------------------------------------------------------------------------
class TestMatchOperatingPoint:
    def test_shifted_prediction_is_true_positive(self, criteria):
        gt = make_clipset({"a.wav": [(0, 2, "A")]})
        pred = make_clipset({"a.wav": [(0.5, 2.5, "A")]})
        counts = match_operating_point(pred, gt, criteria)
        assert counts.tp == {"A": 1}
        assert counts.fp == {}
        assert counts.n_gt == {"A": 1}

    def test_long_prediction_fails_detection_tolerance(self, criteria):
        gt = make_clipset({"a.wav": [(0, 2, "A")]})
        pred = make_clipset({"a.wav": [(0, 4, "A")]})
        counts = match_operating_point(pred, gt, criteria)
        assert counts.fp == {"A": 1}
        assert counts.tp == {}

    def test_empty_predictions(self, criteria, two_class_gt):
        empty = make_clipset({}, durations=two_class_gt.durations, vocabulary=two_class_gt.vocabulary)
        counts = match_operating_point(empty, two_class_gt, criteria)
        assert counts.tp == counts.fp == counts.ct == {}
        assert counts.n_gt == {"Dog": 1, "Speech": 2}

    def test_cross_trigger(self):
        gt = make_clipset({"a.wav": [(0, 2, "B")]}, vocabulary=("A", "B"))
        pred = make_clipset({"a.wav": [(0, 2, "A")]}, vocabulary=("A", "B"))
        counts = match_operating_point(pred, gt, MatchCriteria(dtc=0.7, gtc=0.7, cttc=0.3))
        assert counts.fp == {"A": 1}
        assert counts.ct == {("A", "B"): 1}
        assert counts.classes == ("A", "B")

    def test_intersections_are_summed_over_ground_truth(self, criteria):
        # Neither ground-truth event alone covers 70 % of the prediction.
        gt = make_clipset({"a.wav": [(0, 2, "A"), (2, 4, "A")]})
        pred = make_clipset({"a.wav": [(0.5, 3.5, "A")]})
        counts = match_operating_point(pred, gt, criteria)
        assert counts.fp == {}
        assert counts.tp == {"A": 2}

    def test_fragmented_predictions_cover_ground_truth(self, criteria):
        gt = make_clipset({"a.wav": [(0, 4, "A")]})
        pred = make_clipset({"a.wav": [(0, 1.5, "A"), (1.5, 3, "A")]})
        counts = match_operating_point(pred, gt, criteria)
        assert counts.tp == {"A": 1}

    def test_one_prediction_cross_triggers_several_classes(self, criteria):
        gt = make_clipset({"a.wav": [(0, 2, "B"), (0, 2, "C")]}, vocabulary=("A", "B", "C"))
        pred = make_clipset({"a.wav": [(0, 2, "A")]}, vocabulary=("A", "B", "C"))
        counts = match_operating_point(pred, gt, criteria)
        assert counts.ct == {("A", "B"): 1, ("A", "C"): 1}

    def test_valid_prediction_does_not_cross_trigger(self, criteria):
        gt = make_clipset({"a.wav": [(0, 2, "A"), (0, 2, "B")]})
        pred = make_clipset({"a.wav": [(0, 2, "A")]}, vocabulary=("A", "B"))
        assert match_operating_point(pred, gt, criteria).ct == {}

    def test_label_outside_vocabulary_counts_as_false_positive(self, criteria):
        gt = make_clipset({"a.wav": [(0, 2, "A")]})
        pred = make_clipset({"a.wav": [(0, 2, "A"), (4, 6, "Cat")]}, vocabulary=("A",))
        counts = match_operating_point(pred, gt, criteria)
        assert counts.fp == {"Cat": 1}
        assert "Cat" in counts.classes

    def test_vocabulary_mismatch(self, criteria):
        gt = make_clipset({"a.wav": [(0, 2, "A")]})
        pred = make_clipset({"a.wav": [(0, 2, "A")]}, vocabulary=("A", "B"))
        with pytest.raises(VocabularyMismatch):
            match_operating_point(pred, gt, criteria)

    def test_unknown_clip(self, criteria):
        gt = make_clipset({"a.wav": [(0, 2, "A")]})
        pred = make_clipset({"z.wav": [(0, 2, "A")]})
        with pytest.raises(UnknownClip):
            match_operating_point(pred, gt, criteria)

    @pytest.mark.parametrize("dtc, gtc", [(0.0, 0.0), (0.7, 0.7), (1.0, 1.0)])
    def test_perfect_predictions(self, two_class_gt, dtc, gtc):
        counts = match_operating_point(
            two_class_gt, two_class_gt, MatchCriteria(dtc=dtc, gtc=gtc, cttc=0.3)
        )
        assert counts.tp == counts.n_gt
        assert counts.fp == {}


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------
intervals = st.tuples(
    st.integers(0, 90), st.integers(1, 30), st.sampled_from(["A", "B"])
).map(lambda t: (t[0] / 10, (t[0] + t[1]) / 10, t[2]))


class TestProperties:
    @settings(max_examples=100, deadline=None)
    @given(
        truth=st.lists(intervals, max_size=6),
        predicted=st.lists(intervals, max_size=6),
        low=st.floats(0, 1),
        high=st.floats(0, 1),
    )
    def test_stricter_criteria_never_add_true_positives(self, truth, predicted, low, high):
        low, high = sorted((low, high))
        gt = make_clipset({"a.wav": truth}, durations={"a.wav": 12.0}, vocabulary=("A", "B"))
        pred = make_clipset({"a.wav": predicted}, durations={"a.wav": 12.0}, vocabulary=("A", "B"))
        loose = match_operating_point(pred, gt, MatchCriteria(dtc=low, gtc=low, cttc=0.3))
        strict = match_operating_point(pred, gt, MatchCriteria(dtc=high, gtc=high, cttc=0.3))
        for label in ("A", "B"):
            assert strict.tp.get(label, 0) <= loose.tp.get(label, 0)

    @settings(max_examples=100, deadline=None)
    @given(
        truth=st.lists(intervals, max_size=6),
        predicted=st.lists(intervals, max_size=6),
        scale=st.sampled_from([2.0, 4.0, 0.5, 0.25]),
    )
    def test_scale_invariance(self, truth, predicted, scale):
        # Power-of-two factors keep every product exact.
        def scaled(events):
            return [(on * scale, off * scale, label) for on, off, label in events]

        criteria = MatchCriteria(dtc=0.5, gtc=0.5, cttc=0.3)
        vocabulary = ("A", "B")
        base = match_operating_point(
            make_clipset({"a.wav": predicted}, {"a.wav": 12.0}, vocabulary),
            make_clipset({"a.wav": truth}, {"a.wav": 12.0}, vocabulary),
            criteria,
        )
        stretched = match_operating_point(
            make_clipset({"a.wav": scaled(predicted)}, {"a.wav": 12.0 * scale}, vocabulary),
            make_clipset({"a.wav": scaled(truth)}, {"a.wav": 12.0 * scale}, vocabulary),
            criteria,
        )
        assert stretched == base


# ---------------------------------------------------------------------------
# MatchCounts
# ---------------------------------------------------------------------------
class TestMatchCounts:
    def test_merge_adds_and_is_commutative(self):
        a = MatchCounts(classes=("A",), n_gt={"A": 2}, tp={"A": 1}, fp={"A": 3})
        b = MatchCounts(
            classes=("A", "B"), n_gt={"A": 1, "B": 1}, tp={"B": 1}, ct={("A", "B"): 2}
        )
        merged = a.merge(b)
        assert merged == b.merge(a)
        assert merged.n_gt == {"A": 3, "B": 1}
        assert merged.tp == {"A": 1, "B": 1}
        assert merged.ct == {("A", "B"): 2}

    def test_merge_is_associative(self):
        a = MatchCounts(classes=("A",), n_gt={"A": 1}, tp={"A": 1})
        b = MatchCounts(classes=("B",), n_gt={"B": 2}, fp={"B": 1})
        c = MatchCounts(classes=("A", "B"), fp={"A": 4}, ct={("B", "A"): 1})
        assert a.merge(b).merge(c) == a.merge(b.merge(c))

    def test_partitions_merge_to_whole(self, criteria, two_class_gt):
        pred = make_clipset(
            {"a.wav": [(0, 2, "Speech"), (8, 9, "Dog")], "b.wav": [(1, 3.5, "Speech")]},
            durations=two_class_gt.durations,
            vocabulary=two_class_gt.vocabulary,
        )
        whole = match_operating_point(pred, two_class_gt, criteria)
        parts = [
            match_operating_point(
                pred.model_copy(update={"clips": {k: pred.clips[k]}}),
                two_class_gt.model_copy(update={"clips": {k: two_class_gt.clips[k]}}),
                criteria,
            )
            for k in two_class_gt.clips
        ]
        merged = parts[0].merge(parts[1]).merge(parts[2])
        assert merged == whole

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"classes": ("A",), "n_gt": {"A": 1}, "tp": {"A": 2}},
            {"classes": ("A",), "fp": {"A": -1}},
            {"classes": ("A",), "ct": {("A", "A"): 1}},
        ],
    )
    def test_invalid_counts(self, kwargs):
        with pytest.raises(ValueError):
            MatchCounts(**kwargs)

    def test_counts_to_tsv(self):
        counts = MatchCounts(
            classes=("A", "B"), n_gt={"A": 2, "B": 1}, tp={"A": 1}, fp={"A": 1}, ct={("A", "B"): 1}
        )
        table, matrix = counts_to_tsv(counts).split("\n\n")
        assert table.splitlines() == ["class\tn_gt\ttp\tfp", "A\t2\t1\t1", "B\t1\t0\t0"]
        assert matrix.splitlines() == ["ct\tA\tB", "A\t0\t1", "B\t0\t0"]
