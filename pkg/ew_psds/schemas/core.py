import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Offsets may exceed the clip duration by this much before they are clipped.
EPSILON_CLIP = 1e-6
DEFAULT_HOP = 0.064


# -------------------------------------
# Events and clips
# -------------------------------------
class Event(BaseModel):
    model_config = ConfigDict(frozen=True)

    onset: float
    offset: float
    label: str

    @field_validator("label")
    @classmethod
    def _check_label(cls, label: str) -> str:
        if not label or any(ch in label for ch in "\t\r\n"):
            raise ValueError(f"Event: label must be a non-empty token: {label!r}")
        return label

    @model_validator(mode="after")
    def _check_interval(self) -> "Event":
        if self.onset < 0:
            raise ValueError(f"Event: onset {self.onset} is negative")
        if self.offset <= self.onset:
            raise ValueError(
                f"Event: offset {self.offset} must be greater than onset {self.onset}"
            )
        return self

    @property
    def duration(self) -> float:
        return self.offset - self.onset


class Clip(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    duration: float | None = None
    events: tuple[Event, ...] = ()

    @model_validator(mode="after")
    def _check_bounds(self) -> "Clip":
        if self.duration is None:
            return self
        if self.duration <= 0:
            raise ValueError(f"Clip {self.id}: duration must be positive")
        for event in self.events:
            if event.offset > self.duration + EPSILON_CLIP:
                raise ValueError(
                    f"Clip {self.id}: event offset {event.offset} exceeds "
                    f"duration {self.duration}"
                )
        return self


class ParseIssue(BaseModel):
    model_config = ConfigDict(frozen=True)

    line: int | None
    message: str


class ClipSet(BaseModel):
    """Clips keyed by id, plus the class vocabulary used for scoring.

    ``issues`` holds rows rejected by a lenient parse and ``warnings`` the
    events that were clipped or dropped while durations were merged.
    """

    model_config = ConfigDict(frozen=True)

    clips: dict[str, Clip] = Field(default_factory=dict)
    vocabulary: tuple[str, ...] = ()
    issues: tuple[ParseIssue, ...] = ()
    warnings: tuple[str, ...] = ()

    @field_validator("vocabulary")
    @classmethod
    def _check_vocabulary(cls, vocabulary: tuple[str, ...]) -> tuple[str, ...]:
        if list(vocabulary) != sorted(set(vocabulary)):
            raise ValueError("ClipSet: vocabulary must be sorted and duplicate-free")
        return vocabulary

    @property
    def total_duration(self) -> float:
        return math.fsum(
            clip.duration for clip in self.clips.values() if clip.duration is not None
        )

    @property
    def labels(self) -> tuple[str, ...]:
        """Every label present in the events, sorted."""
        return tuple(
            sorted({e.label for clip in self.clips.values() for e in clip.events})
        )

    @property
    def n_events(self) -> int:
        return sum(len(clip.events) for clip in self.clips.values())

    @property
    def durations(self) -> dict[str, float]:
        return {
            clip_id: clip.duration
            for clip_id, clip in self.clips.items()
            if clip.duration is not None
        }

    def events(self):
        for clip_id, clip in self.clips.items():
            for event in clip.events:
                yield clip_id, event


# -------------------------------------
# Frame-level posteriors
# -------------------------------------
class PosteriorMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    clip_id: str
    classes: tuple[str, ...]
    scores: np.ndarray
    hop: float = DEFAULT_HOP

    @model_validator(mode="after")
    def _check_scores(self) -> "PosteriorMatrix":
        if self.scores.ndim != 2 or self.scores.shape[1] != len(self.classes):
            raise ValueError(
                f"PosteriorMatrix {self.clip_id}: expected frames x "
                f"{len(self.classes)} scores, got shape {self.scores.shape}"
            )
        if self.scores.size and (self.scores.min() < 0 or self.scores.max() > 1):
            raise ValueError(f"PosteriorMatrix {self.clip_id}: scores outside [0, 1]")
        if self.hop <= 0:
            raise ValueError(f"PosteriorMatrix {self.clip_id}: hop must be positive")
        return self

    @property
    def n_frames(self) -> int:
        return int(self.scores.shape[0])

    def column(self, label: str) -> np.ndarray:
        return self.scores[:, self.classes.index(label)]
