from collections import Counter

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .core import DEFAULT_HOP, ClipSet

DEFAULT_MEDIAN_WINDOW = 7


def default_thresholds() -> tuple[float, ...]:
    return tuple(round(0.01 + k * 0.02, 2) for k in range(50))


# -------------------------------------
# Decoding
# -------------------------------------
class DecoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    thresholds: tuple[float, ...] = Field(default_factory=default_thresholds)
    median_window: int | dict[str, int] = DEFAULT_MEDIAN_WINDOW
    hop: float = DEFAULT_HOP

    @field_validator("thresholds")
    @classmethod
    def _check_thresholds(cls, thresholds: tuple[float, ...]) -> tuple[float, ...]:
        if not thresholds:
            raise ValueError("DecoderConfig: at least one threshold is required")
        if any(not 0 < t < 1 for t in thresholds):
            raise ValueError("DecoderConfig: thresholds must lie in (0, 1)")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("DecoderConfig: thresholds must be strictly increasing")
        return thresholds

    @field_validator("median_window")
    @classmethod
    def _check_window(cls, window: int | dict[str, int]) -> int | dict[str, int]:
        windows = window.values() if isinstance(window, dict) else [window]
        for w in windows:
            if w < 1 or w % 2 == 0:
                raise ValueError(f"DecoderConfig: median window {w} must be odd and >= 1")
        return window

    @field_validator("hop")
    @classmethod
    def _check_hop(cls, hop: float) -> float:
        if hop <= 0:
            raise ValueError("DecoderConfig: hop must be positive")
        return hop

    def window_for(self, label: str) -> int:
        if isinstance(self.median_window, dict):
            return self.median_window.get(label, DEFAULT_MEDIAN_WINDOW)
        return self.median_window


class OperatingPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    threshold: float
    predictions: ClipSet
    name: str = ""


# -------------------------------------
# Matching
# -------------------------------------
class MatchCriteria(BaseModel):
    model_config = ConfigDict(frozen=True)

    dtc: float = Field(ge=0, le=1)
    gtc: float = Field(ge=0, le=1)
    cttc: float = Field(ge=0, le=1)


class MatchCounts(BaseModel):
    """Per-class counts of one operating point.

    ``ct`` is keyed by (predicted class, ground-truth class).
    """

    model_config = ConfigDict(frozen=True)

    classes: tuple[str, ...] = ()
    n_gt: dict[str, int] = Field(default_factory=dict)
    tp: dict[str, int] = Field(default_factory=dict)
    fp: dict[str, int] = Field(default_factory=dict)
    ct: dict[tuple[str, str], int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_counts(self) -> "MatchCounts":
        for label in self.classes:
            if not 0 <= self.tp.get(label, 0) <= self.n_gt.get(label, 0):
                raise ValueError(f"MatchCounts: tp({label}) outside [0, n_gt]")
            if self.fp.get(label, 0) < 0:
                raise ValueError(f"MatchCounts: fp({label}) is negative")
        for (c, c_gt), count in self.ct.items():
            if c == c_gt or count < 0:
                raise ValueError(f"MatchCounts: invalid cross-trigger ct({c}, {c_gt})")
        return self

    def merge(self, other: "MatchCounts") -> "MatchCounts":
        def add(a: dict, b: dict) -> dict:
            total = Counter(a)
            total.update(b)
            return {key: value for key, value in sorted(total.items()) if value}

        return MatchCounts(
            classes=tuple(sorted(set(self.classes) | set(other.classes))),
            n_gt=add(self.n_gt, other.n_gt),
            tp=add(self.tp, other.tp),
            fp=add(self.fp, other.fp),
            ct=add(self.ct, other.ct),
        )

    def normalized(self) -> "MatchCounts":
        """Drop zero entries and sort keys so equal counts compare equal."""
        return MatchCounts(classes=self.classes).merge(self)


# -------------------------------------
# PSDS
# -------------------------------------
class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    criteria: MatchCriteria
    alpha_ct: float = Field(default=0.0, ge=0)
    alpha_st: float = Field(default=1.0, ge=0)
    e_max: float = Field(default=100.0, gt=0)


class ClassRates(BaseModel):
    """Per-class rates of one operating point; FP and cross-trigger rates are per hour.

    ``scored`` lists the classes that have ground truth.
    """

    model_config = ConfigDict(frozen=True)

    classes: tuple[str, ...]
    scored: tuple[str, ...]
    tpr: dict[str, float]
    fpr: dict[str, float]
    ctr: dict[tuple[str, str], float] = Field(default_factory=dict)


class EffectiveRates(BaseModel):
    model_config = ConfigDict(frozen=True)

    classes: tuple[str, ...]
    scored: tuple[str, ...]
    tpr: dict[str, float]
    efpr: dict[str, float]


class RocCurve(BaseModel):
    """PSD-ROC sampled at its breakpoints; each value holds until the next breakpoint."""

    model_config = ConfigDict(frozen=True)

    efpr: tuple[float, ...]
    values: tuple[float, ...]
    classes: tuple[str, ...] = ()
    per_class: dict[str, tuple[float, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_curve(self) -> "RocCurve":
        if len(self.efpr) != len(self.values) or not self.efpr:
            raise ValueError("RocCurve: efpr and values must be non-empty and aligned")
        if self.efpr[0] < 0 or any(b <= a for a, b in zip(self.efpr, self.efpr[1:])):
            raise ValueError("RocCurve: efpr must be non-negative and increasing")
        if any(not 0 <= v <= 1 for v in self.values):
            raise ValueError("RocCurve: values must lie in [0, 1]")
        return self

    def value_at(self, efpr: float) -> float:
        value = 0.0
        for e, v in zip(self.efpr, self.values):
            if e > efpr:
                break
            value = v
        return value


class PsdsResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario: str
    psds: float = Field(ge=0, le=1)
    curve: RocCurve
    n_operating_points: int
