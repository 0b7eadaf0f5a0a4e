"""Energy metering of inference runs.

Power is sampled while a wrapped command runs and the trace is integrated
with the trapezoidal rule:

    kwh = integral(watts dt) / 3.6e6

Sources are pluggable (CPU TDP model, GPU power command, recorded trace
replay); the replay source makes metering deterministic.
"""

import platform
import shlex
import subprocess
import threading
import time
from collections.abc import Callable, Iterator
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
import psutil
from dotenv import dotenv_values
from loguru import logger

from .base import BasePowerSource
from .config import config as default_config
from .exceptions import (
    CommandFailed,
    InputError,
    NonMonotonicTimestamps,
    NonPositiveEnergy,
    SourceUnavailable,
    TooFewSamples,
    UnknownRegion,
)
from .schemas.energy import EnergyConfig, EnergyReport, PowerSample
from .types.energy import PowerSourceKind, RunPhase
from .utils import JOULES_PER_KWH, format_float, iter_tsv_rows, parse_float, read_text

TRACE_HEADER = ("timestamp", "watts")
REPORT_TSV_HEADER = ("run_label", "kwh", "duration_s", "mean_watts", "co2_g", "hardware")


# -------------------------------------
# Integration and conversions
# -------------------------------------
def integrate(trace: list[PowerSample]) -> float:
    if len(trace) < 2:
        raise TooFewSamples(f"integrate: need at least 2 samples, got {len(trace)}")
    timestamps = np.array([s.timestamp for s in trace])
    watts = np.array([s.watts for s in trace])
    steps = np.diff(timestamps)
    if (steps <= 0).any():
        index = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise NonMonotonicTimestamps(
            f"integrate: timestamp {timestamps[index]} at sample {index} does not "
            "increase"
        )
    return float(np.trapezoid(watts, timestamps)) / JOULES_PER_KWH


def co2(kwh: float, carbon_intensity_g_per_kwh: float) -> float:
    if kwh < 0 or carbon_intensity_g_per_kwh < 0:
        raise InputError("co2: energy and carbon intensity must be non-negative")
    return kwh * carbon_intensity_g_per_kwh


def normalize(kwh_submission: float, kwh_baseline: float) -> float:
    """Baseline-relative energy weight ``kwh_baseline / kwh_submission``."""
    if kwh_submission <= 0 or kwh_baseline <= 0:
        raise NonPositiveEnergy(
            f"normalize: energies must be positive, got submission={kwh_submission} "
            f"baseline={kwh_baseline}"
        )
    return kwh_baseline / kwh_submission


def load_carbon_table(path: str | Path | None = None) -> dict[str, float]:
    path = Path(path or default_config["energy"]["carbon_table"])
    table = pd.read_csv(path, sep="\t", comment="#", dtype={"region": str})
    return dict(zip(table["region"].str.lower(), table["g_per_kwh"].astype(float)))


def carbon_intensity(region: str, table_path: str | Path | None = None) -> float:
    table = load_carbon_table(table_path)
    try:
        return table[region.lower()]
    except KeyError:
        raise UnknownRegion(
            f"unknown region {region!r}; known regions: {', '.join(sorted(table))}"
        ) from None


# -------------------------------------
# Power sources
# -------------------------------------
class CpuTdpSource(BasePowerSource):
    """Estimates power as TDP times the instantaneous CPU utilization."""

    kind = PowerSourceKind.CPU_TDP_MODEL

    def __init__(self, tdp_watts: float, utilization: Callable[[], float] | None = None):
        self.tdp_watts = tdp_watts
        if utilization is None:
            # The first psutil reading is relative to process start; discard it.
            psutil.cpu_percent(interval=None)
            utilization = self._psutil_utilization
        self.utilization = utilization

    @staticmethod
    def _psutil_utilization() -> float:
        return psutil.cpu_percent(interval=None) / 100.0

    def read_watts(self) -> float:
        fraction = min(max(self.utilization(), 0.0), 1.0)
        return self.tdp_watts * fraction


class GpuCommandSource(BasePowerSource):
    """Runs a user command that prints one watts value per line (one per GPU)
    and reports their sum."""

    kind = PowerSourceKind.GPU_QUERY

    def __init__(self, command: str, timeout: float = 10.0):
        self.command = command
        self.timeout = timeout

    def read_watts(self) -> float:
        try:
            result = subprocess.run(
                shlex.split(self.command),
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            raise SourceUnavailable(f"GpuCommandSource: {self.command!r}: {e}") from e
        if result.returncode != 0:
            raise SourceUnavailable(
                f"GpuCommandSource: {self.command!r} exited with {result.returncode}"
            )
        return parse_gpu_output(result.stdout)


def parse_gpu_output(stdout: str) -> float:
    values = []
    for number, line in enumerate(stdout.splitlines(), start=1):
        text = line.strip()
        if not text:
            continue
        try:
            watts = float(text)
        except ValueError:
            raise SourceUnavailable(
                f"GPU power output line {number} is not a watts value: {text!r}"
            ) from None
        if watts < 0 or watts != watts:
            raise SourceUnavailable(f"GPU power output line {number}: invalid {text!r}")
        values.append(watts)
    if not values:
        raise SourceUnavailable("GPU power command printed no watts value")
    return float(sum(values))


class ReplaySource(BasePowerSource):
    """Replays a recorded ``timestamp watts`` trace."""

    kind = PowerSourceKind.EXTERNAL_FILE

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            self.trace = read_power_trace(read_text(self.path))
        except SourceUnavailable:
            raise
        except (FileNotFoundError, InputError) as e:
            raise SourceUnavailable(f"ReplaySource: {self.path}: {e}") from e
        self._position = 0

    def read_watts(self) -> float:
        if not self.trace:
            raise SourceUnavailable(f"ReplaySource: {self.path} holds no samples")
        sample = self.trace[min(self._position, len(self.trace) - 1)]
        self._position += 1
        return sample.watts

    def replay(self) -> list[PowerSample]:
        return list(self.trace)


def create_power_source(config: EnergyConfig) -> BasePowerSource:
    if config.source == PowerSourceKind.CPU_TDP_MODEL:
        return CpuTdpSource(config.tdp_watts)
    if config.source == PowerSourceKind.GPU_QUERY:
        return GpuCommandSource(config.gpu_power_cmd or "")
    return ReplaySource(config.replay_path or "")


def read_power_trace(tsv_text: str) -> list[PowerSample]:
    trace = []
    for line, fields in iter_tsv_rows(tsv_text, TRACE_HEADER):
        if len(fields) != 2:
            raise SourceUnavailable(f"power trace line {line}: expected 2 columns")
        try:
            timestamp = parse_float(fields[0], "timestamp", line)
            watts = parse_float(fields[1], "watts", line)
        except InputError as e:
            raise SourceUnavailable(f"power trace {e}") from e
        if watts < 0:
            raise SourceUnavailable(f"power trace line {line}: negative watts")
        trace.append(
            PowerSample(
                timestamp=timestamp, watts=watts, source=PowerSourceKind.EXTERNAL_FILE
            )
        )
    return trace


def write_power_trace(trace: list[PowerSample]) -> str:
    lines = ["\t".join(TRACE_HEADER)]
    lines += [f"{format_float(s.timestamp)}\t{format_float(s.watts)}" for s in trace]
    return "\n".join(lines) + "\n"


# -------------------------------------
# Sampling and metering
# -------------------------------------
def sample_power(
    config: EnergyConfig,
    stop: threading.Event | None = None,
    source: BasePowerSource | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> Iterator[PowerSample]:
    """Stream power samples every ``config.interval`` seconds until ``stop`` is set.

    Sampling continues after ``stop`` is set until the stream holds at least
    two samples, so a stopped stream can always be integrated. Replay sources
    yield their recorded trace.
    """
    source = source or create_power_source(config)
    recorded = source.replay()
    if recorded is not None:
        yield from recorded
        return
    stop = stop or threading.Event()
    start = clock()
    last = -1.0
    count = 0
    while True:
        stopped = stop.is_set()
        now = clock() - start
        if now > last:
            yield PowerSample(timestamp=now, watts=source.read_watts(), source=source.kind)
            last = now
            count += 1
        if stopped and count >= 2:
            return
        stop.wait(config.interval)


class _Sampler(threading.Thread):
    """Single producer: the only writer to ``trace`` until joined."""

    def __init__(self, config: EnergyConfig, source: BasePowerSource):
        super().__init__(daemon=True)
        self.config = config
        self.source = source
        self.stop_event = threading.Event()
        self.trace: list[PowerSample] = []
        self.error: Exception | None = None

    def run(self) -> None:
        try:
            for sample in sample_power(self.config, self.stop_event, self.source):
                self.trace.append(sample)
        except Exception as e:
            self.error = e

    def finish(self) -> list[PowerSample]:
        self.stop_event.set()
        self.join()
        if self.error is not None:
            raise self.error
        return self.trace


def describe_hardware() -> str:
    return f"{platform.machine()} {platform.processor() or 'cpu'} x{psutil.cpu_count()}"


def meter_run(
    command_line: list[str],
    config: EnergyConfig,
    run_label: str = "",
    phase: RunPhase = RunPhase.INFERENCE,
) -> EnergyReport:
    """Run a command while sampling power and report its energy.

    A non-zero exit status, or a command that cannot be started, raises
    :class:`CommandFailed` carrying the report.
    """
    source = create_power_source(config)
    if source.replay() is None:
        source.read_watts()  # fail before launching when the source is unusable
    sampler = _Sampler(config, source)
    logger.info(f"meter_run: running {shlex.join(command_line)}")
    start = time.monotonic()
    sampler.start()
    try:
        exit_status = subprocess.run(command_line).returncode
        error = None
    except FileNotFoundError as e:
        exit_status, error = 127, f"command not found: {e}"
    except PermissionError as e:
        exit_status, error = 126, f"command not executable: {e}"
    except OSError as e:
        exit_status, error = 126, f"command could not be started: {e}"
    finally:
        trace = sampler.finish()
    duration = time.monotonic() - start

    kwh = integrate(trace)
    intensity = (
        carbon_intensity(config.region, config.carbon_table) if config.region else None
    )
    report = EnergyReport(
        run_label=run_label or shlex.join(command_line),
        kwh=kwh,
        duration=duration,
        sample_count=len(trace),
        mean_watts=kwh * JOULES_PER_KWH / duration if duration > 0 else 0.0,
        co2_grams=co2(kwh, intensity) if intensity is not None else None,
        hardware_descriptor=config.hardware or describe_hardware(),
        phase=phase,
        source=source.kind,
        interval_s=config.interval,
        exit_status=exit_status,
        region=config.region,
        carbon_intensity=intensity,
    )
    logger.info(
        f"meter_run: {report.kwh:.6f} kWh over {duration:.2f} s "
        f"({report.sample_count} samples, exit status {exit_status})"
    )
    if report.failed:
        raise CommandFailed(
            error or f"command exited with status {exit_status}", report=report
        )
    return report


# -------------------------------------
# Report serialization
# -------------------------------------
_REPORT_FIELDS = (
    "run_label",
    "phase",
    "kwh",
    "duration_s",
    "sample_count",
    "mean_watts",
    "co2_g",
    "carbon_intensity",
    "region",
    "hardware",
    "source",
    "interval_s",
    "exit_status",
)


def _report_values(report: EnergyReport) -> dict[str, str]:
    def number(value: float | None) -> str:
        return "" if value is None else format_float(value)

    return {
        "run_label": report.run_label,
        "phase": report.phase.value,
        "kwh": format_float(report.kwh),
        "duration_s": format_float(report.duration),
        "sample_count": str(report.sample_count),
        "mean_watts": format_float(report.mean_watts),
        "co2_g": number(report.co2_grams),
        "carbon_intensity": number(report.carbon_intensity),
        "region": report.region or "",
        "hardware": report.hardware_descriptor,
        "source": report.source.value,
        "interval_s": format_float(report.interval_s),
        "exit_status": "" if report.exit_status is None else str(report.exit_status),
    }


def _quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace("\"", "\\\"")
    return f'"{escaped}"'


def report_to_text(report: EnergyReport) -> str:
    values = _report_values(report)
    return "".join(f"{key} = {_quote(values[key])}\n" for key in _REPORT_FIELDS)


def report_to_tsv(report: EnergyReport) -> str:
    values = _report_values(report)
    row = [values[key] for key in REPORT_TSV_HEADER]
    return "\t".join(REPORT_TSV_HEADER) + "\n" + "\t".join(row) + "\n"


def read_energy_report(text: str) -> EnergyReport:
    values = {k: v or "" for k, v in dotenv_values(stream=StringIO(text)).items()}

    def optional(key: str) -> float | None:
        return float(values[key]) if values.get(key) else None

    return EnergyReport(
        run_label=values.get("run_label", ""),
        phase=RunPhase(values.get("phase", RunPhase.INFERENCE.value)),
        kwh=float(values["kwh"]),
        duration=float(values["duration_s"]),
        sample_count=int(values["sample_count"]),
        mean_watts=float(values["mean_watts"]),
        co2_grams=optional("co2_g"),
        carbon_intensity=optional("carbon_intensity"),
        region=values.get("region") or None,
        hardware_descriptor=values.get("hardware", ""),
        source=PowerSourceKind(values.get("source", PowerSourceKind.EXTERNAL_FILE.value)),
        interval_s=float(values.get("interval_s") or 1.0),
        exit_status=int(values["exit_status"]) if values.get("exit_status") else None,
    )
