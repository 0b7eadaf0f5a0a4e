from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..types.energy import PowerSourceKind, RunPhase

MIN_INTERVAL = 0.1


class PowerSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: float
    watts: float = Field(ge=0)
    source: PowerSourceKind


class EnergyConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: PowerSourceKind = PowerSourceKind.CPU_TDP_MODEL
    interval: float = Field(default=1.0, ge=MIN_INTERVAL)
    tdp_watts: float = Field(default=65.0, gt=0)
    gpu_power_cmd: str | None = None
    replay_path: str | None = None
    hardware: str = ""
    region: str | None = None
    carbon_table: str | None = None

    @model_validator(mode="after")
    def _check_source(self) -> "EnergyConfig":
        if self.source == PowerSourceKind.GPU_QUERY and not self.gpu_power_cmd:
            raise ValueError("EnergyConfig: gpu_query source needs gpu_power_cmd")
        if self.source == PowerSourceKind.EXTERNAL_FILE and not self.replay_path:
            raise ValueError("EnergyConfig: external_file source needs replay_path")
        return self


class EnergyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    run_label: str
    kwh: float = Field(ge=0)
    duration: float = Field(ge=0)
    sample_count: int
    mean_watts: float = Field(ge=0)
    co2_grams: float | None = None
    hardware_descriptor: str = ""
    phase: RunPhase = RunPhase.INFERENCE
    source: PowerSourceKind = PowerSourceKind.EXTERNAL_FILE
    interval_s: float = 1.0
    exit_status: int | None = None
    region: str | None = None
    carbon_intensity: float | None = None

    @property
    def failed(self) -> bool:
        return self.exit_status not in (None, 0)
