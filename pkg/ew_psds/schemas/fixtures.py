from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PerturbSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    onset_jitter_std: float = Field(default=0.0, ge=0)
    deletion_prob: float = Field(default=0.0, ge=0, le=1)
    substitution_prob: float = Field(default=0.0, ge=0, le=1)
    insertion_rate: float = Field(default=0.0, ge=0)
    insertion_duration: tuple[float, float] = (0.2, 2.0)

    @field_validator("insertion_duration")
    @classmethod
    def _check_range(cls, bounds: tuple[float, float]) -> tuple[float, float]:
        low, high = bounds
        if not 0 < low <= high:
            raise ValueError(f"PerturbSpec: invalid insertion_duration {bounds}")
        return bounds


class FixtureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0, lt=2**64)
    n_clips: int = Field(default=10, ge=0)
    clip_duration: float = Field(default=10.0, gt=0)
    classes: tuple[str, ...] = ("Speech", "Dog")
    events_per_clip: tuple[int, int] = (1, 4)
    event_duration: tuple[float, float] = (0.5, 3.0)
    perturbation: PerturbSpec = Field(default_factory=PerturbSpec)

    @model_validator(mode="after")
    def _check_ranges(self) -> "FixtureSpec":
        low, high = self.events_per_clip
        if not 0 <= low <= high:
            raise ValueError(f"FixtureSpec: invalid events_per_clip {self.events_per_clip}")
        low_d, high_d = self.event_duration
        if not 0 < low_d <= high_d:
            raise ValueError(f"FixtureSpec: invalid event_duration {self.event_duration}")
        if high > 0 and low_d > self.clip_duration:
            raise ValueError("FixtureSpec: event_duration exceeds clip_duration")
        if high > 0 and not self.classes:
            raise ValueError("FixtureSpec: classes are required to generate events")
        return self
