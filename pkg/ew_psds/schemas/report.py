from pydantic import BaseModel, ConfigDict, Field


class SystemEntry(BaseModel):
    """One submitted system: PSDS keyed by (split, scenario) and kWh keyed by split."""

    model_config = ConfigDict(frozen=True)

    name: str
    psds: dict[tuple[str, str], float] = Field(default_factory=dict)
    kwh: dict[str, float] = Field(default_factory=dict)
    is_baseline: bool = False

    @property
    def splits(self) -> set[str]:
        return {split for split, _ in self.psds} | set(self.kwh)


class ReportRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    system: str
    split: str
    scenario: str
    psds: float
    kwh: float
    energy_ratio: float
    ew_psds: float
    is_baseline: bool = False


class EfficiencySummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    split: str
    scenario: str
    best_psds: str
    best_ew_psds: str


class Report(BaseModel):
    model_config = ConfigDict(frozen=True)

    splits: tuple[str, ...]
    scenarios: tuple[str, ...]
    systems: tuple[str, ...]
    rows: tuple[ReportRow, ...]
    summary: tuple[EfficiencySummary, ...] = ()

    def row(self, system: str, split: str, scenario: str) -> ReportRow:
        for row in self.rows:
            if (row.system, row.split, row.scenario) == (system, split, scenario):
                return row
        raise KeyError((system, split, scenario))
