import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ew_psds.decoder import binarize_and_merge, decode, median_filter
from ew_psds.exceptions import InputError, MissingDuration, VocabularyMismatch
from ew_psds.schemas.core import PosteriorMatrix
from ew_psds.schemas.scoring import DecoderConfig, default_thresholds

HOP = 0.064


def ten_frame_column() -> np.ndarray:
    column = np.zeros(10)
    column[3:7] = 0.9
    return column


def matrix(columns: dict[str, list[float]], clip_id: str = "a.wav") -> PosteriorMatrix:
    classes = tuple(columns)
    scores = np.column_stack([np.asarray(columns[c], dtype=float) for c in classes])
    return PosteriorMatrix(clip_id=clip_id, classes=classes, scores=scores, hop=HOP)


def active_frames(events, hop: float = HOP) -> set[int]:
    frames = set()
    for event in events:
        start = round(event.onset / hop)
        end = round(event.offset / hop)
        frames.update(range(start, end))
    return frames


# ---------------------------------------------------------------------------
# median_filter
# ---------------------------------------------------------------------------
class TestMedianFilter:
    @pytest.mark.parametrize(
        "sequence, window, expected",
        [
            ([1] * 10, 7, [1] * 10),
            ([0, 0, 1, 0, 0], 3, [0, 0, 0, 0, 0]),
            ([1, 1, 0, 1, 1], 3, [1, 1, 1, 1, 1]),
            ([0, 1, 1, 1, 0], 1, [0, 1, 1, 1, 0]),
            ([], 7, []),
        ],
    )
    def test_examples(self, sequence, window, expected):
        assert median_filter(sequence, window).tolist() == expected

    def test_length_preserved(self):
        assert len(median_filter([0, 1] * 11, 7)) == 22

    def test_edge_tie_counts_as_active(self):
        # First frame sees [1, 0]: an even split at the truncated edge.
        assert median_filter([1, 0, 0, 0], 3).tolist()[0] == 1

    @pytest.mark.parametrize("window", [0, 2, -3])
    def test_invalid_window(self, window):
        with pytest.raises(ValueError):
            median_filter([0, 1], window)


# ---------------------------------------------------------------------------
# binarize_and_merge
# ---------------------------------------------------------------------------
class TestBinarizeAndMerge:
    def test_single_event(self):
        (event,) = binarize_and_merge(ten_frame_column(), 0.5, HOP, "Speech")
        assert event.onset == pytest.approx(0.192, abs=1e-12)
        assert event.offset == pytest.approx(0.448, abs=1e-12)
        assert event.label == "Speech"

    def test_all_below_threshold(self):
        assert binarize_and_merge(np.full(10, 0.2), 0.5, HOP, "Speech") == []

    def test_threshold_is_inclusive(self):
        (event,) = binarize_and_merge(np.full(10, 0.5), 0.5, HOP, "Speech")
        assert event.onset == 0.0
        assert event.offset == pytest.approx(10 * HOP)

    def test_offset_clipped_to_duration(self):
        (event,) = binarize_and_merge(np.ones(10), 0.5, HOP, "Speech", duration=0.6)
        assert event.offset == 0.6

    def test_median_window_removes_blip(self):
        column = np.zeros(20)
        column[10] = 1.0
        assert binarize_and_merge(column, 0.5, HOP, "Dog", window=7) == []

    def test_events_last_at_least_one_hop(self):
        column = np.array([0.9, 0.1, 0.9, 0.1, 0.9, 0.9])
        for event in binarize_and_merge(column, 0.5, HOP, "Dog"):
            assert event.offset - event.onset >= HOP - 1e-12


# ---------------------------------------------------------------------------
# decode
# ---------------------------------------------------------------------------
class TestDecode:
    def test_single_threshold(self):
        config = DecoderConfig(thresholds=(0.5,), median_window=1)
        (op,) = decode([matrix({"Speech": ten_frame_column().tolist()})], config)
        assert op.threshold == 0.5
        assert op.name == "pred_th0.50"
        assert op.predictions.n_events == 1

    def test_default_sweep_on_zero_posteriors(self):
        ops = decode([matrix({"Speech": [0.0] * 10})])
        assert len(ops) == 50
        assert [op.threshold for op in ops] == list(default_thresholds())
        assert all(op.predictions.n_events == 0 for op in ops)

    def test_monotonicity_fixture(self):
        config = DecoderConfig(thresholds=(0.5, 0.7), median_window=1)
        low, high = decode([matrix({"Speech": [0.6] * 10})], config)
        assert low.predictions.n_events == 1
        assert high.predictions.n_events == 0

    def test_durations_add_empty_clips(self):
        config = DecoderConfig(thresholds=(0.5,))
        (op,) = decode(
            [matrix({"Speech": [0.0] * 10})], config, durations={"a.wav": 0.64, "b.wav": 5.0}
        )
        assert set(op.predictions.clips) == {"a.wav", "b.wav"}
        assert op.predictions.total_duration == pytest.approx(5.64)

    def test_missing_duration(self):
        with pytest.raises(MissingDuration):
            decode([matrix({"Speech": [0.0] * 10})], durations={"b.wav": 5.0})

    def test_posteriors_longer_than_clip(self):
        with pytest.raises(InputError):
            decode([matrix({"Speech": [0.0] * 100})], durations={"a.wav": 1.0})

    def test_class_outside_vocabulary(self):
        with pytest.raises(VocabularyMismatch):
            decode([matrix({"Cat": [0.0] * 10})], vocabulary=("Dog",))

    def test_per_class_window(self):
        column = [0.0] * 5 + [1.0] + [0.0] * 5
        config = DecoderConfig(thresholds=(0.5,), median_window={"Dog": 3, "Speech": 1})
        (op,) = decode([matrix({"Dog": column, "Speech": column})], config)
        assert {e.label for _, e in op.predictions.events()} == {"Speech"}

    def test_unlisted_class_gets_default_window(self):
        column = [0.0] * 5 + [1.0] + [0.0] * 5
        config = DecoderConfig(thresholds=(0.5,), median_window={"Speech": 1})
        assert config.window_for("Dog") == 7
        (op,) = decode([matrix({"Dog": column, "Speech": column})], config)
        assert {e.label for _, e in op.predictions.events()} == {"Speech"}

    def test_clip_order_does_not_matter(self):
        a = matrix({"Speech": ten_frame_column().tolist()}, "a.wav")
        b = matrix({"Speech": [0.9] * 10}, "b.wav")
        config = DecoderConfig(thresholds=(0.3, 0.5))
        forward = decode([a, b], config)
        backward = decode([b, a], config)
        assert [op.predictions for op in forward] == [op.predictions for op in backward]

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"thresholds": ()},
            {"thresholds": (0.5, 0.3)},
            {"thresholds": (0.0, 0.5)},
            {"median_window": 4},
            {"median_window": {"Dog": 2}},
            {"hop": 0.0},
        ],
    )
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            DecoderConfig(**kwargs)


class TestThresholdMonotonicity:
    @settings(max_examples=200, deadline=None)
    @given(
        column=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40),
        thresholds=st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
        window=st.sampled_from([1, 3, 7]),
    )
    def test_higher_threshold_activates_subset(self, column, thresholds, window):
        low, high = sorted(thresholds)
        at_low = active_frames(binarize_and_merge(column, low, HOP, "Dog", window=window))
        at_high = active_frames(binarize_and_merge(column, high, HOP, "Dog", window=window))
        assert at_high <= at_low
