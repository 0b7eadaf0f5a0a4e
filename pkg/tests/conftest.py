import pytest

from ew_psds.config import scenario_preset
from ew_psds.energy import write_power_trace
from ew_psds.schemas.core import Clip, ClipSet, Event
from ew_psds.schemas.energy import PowerSample
from ew_psds.schemas.scoring import MatchCriteria, OperatingPoint
from ew_psds.types.energy import PowerSourceKind


def make_clipset(
    clips: dict[str, list[tuple[float, float, str]]],
    durations: dict[str, float] | None = None,
    vocabulary: tuple[str, ...] | None = None,
) -> ClipSet:
    """Build a ClipSet from ``{clip_id: [(onset, offset, label), ...]}``."""
    durations = durations or {clip_id: 10.0 for clip_id in clips}
    built = {
        clip_id: Clip(
            id=clip_id,
            duration=duration,
            events=tuple(
                Event(onset=on, offset=off, label=label)
                for on, off, label in clips.get(clip_id, [])
            ),
        )
        for clip_id, duration in durations.items()
    }
    if vocabulary is None:
        vocabulary = tuple(
            sorted({label for events in clips.values() for _, _, label in events})
        )
    return ClipSet(clips=built, vocabulary=vocabulary)


def make_trace(points: list[tuple[float, float]]) -> list[PowerSample]:
    return [
        PowerSample(timestamp=t, watts=w, source=PowerSourceKind.EXTERNAL_FILE)
        for t, w in points
    ]


@pytest.fixture
def criteria() -> MatchCriteria:
    return MatchCriteria(dtc=0.7, gtc=0.7, cttc=0.3)


@pytest.fixture
def scenario1():
    return scenario_preset("scenario1")


@pytest.fixture
def scenario2():
    return scenario_preset("scenario2")


@pytest.fixture
def two_class_gt() -> ClipSet:
    return make_clipset(
        {
            "a.wav": [(0.0, 2.0, "Speech"), (5.0, 7.0, "Dog")],
            "b.wav": [(1.0, 4.0, "Speech")],
        },
        durations={"a.wav": 10.0, "b.wav": 10.0, "c.wav": 10.0},
    )


@pytest.fixture
def perfect_points(two_class_gt) -> list[OperatingPoint]:
    return [OperatingPoint(threshold=0.5, predictions=two_class_gt, name="perfect")]


@pytest.fixture
def constant_trace() -> list[PowerSample]:
    """100 W for one hour, sampled every 60 s."""
    return make_trace([(float(t), 100.0) for t in range(0, 3601, 60)])


@pytest.fixture
def replay_file(tmp_path, constant_trace):
    path = tmp_path / "trace.tsv"
    path.write_text(write_power_trace(constant_trace), encoding="utf-8")
    return path
