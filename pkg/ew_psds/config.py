from pathlib import Path
from typing import Any, Callable

from dotenv import dotenv_values
from pydantic import ValidationError

from .exceptions import ConfigError
from .schemas.energy import EnergyConfig
from .schemas.fixtures import FixtureSpec, PerturbSpec
from .schemas.scoring import DEFAULT_MEDIAN_WINDOW, MatchCriteria, ScenarioConfig
from .types.energy import PowerSourceKind

CARBON_TABLE = Path(__file__).parent / "data" / "carbon_intensity.tsv"

config = {
    "decoder": {
        "hop": 0.064,
        "median_window": DEFAULT_MEDIAN_WINDOW,
        "n_thresholds": 50,
    },
    "scenarios": {
        "scenario1": {
            "dtc": 0.7,
            "gtc": 0.7,
            "cttc": 0.3,
            "alpha_ct": 0.0,
            "alpha_st": 1.0,
            "e_max": 100.0,
        },
        "scenario2": {
            "dtc": 0.1,
            "gtc": 0.1,
            "cttc": 0.3,
            "alpha_ct": 0.5,
            "alpha_st": 1.0,
            "e_max": 100.0,
        },
    },
    "energy": {
        "interval": 1.0,
        "min_interval": 0.1,
        "tdp_watts": 65.0,
        "carbon_table": str(CARBON_TABLE),
    },
}

SCENARIO_ALIASES = {"1": "scenario1", "2": "scenario2"}


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines (``#`` comments allowed) into a dict."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    values = dotenv_values(path)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigError(missing[0], "expected 'key = value'")
    return {key: value for key, value in values.items() if value is not None}


def _convert(key: str, value: str, parse: Callable[[str], Any]) -> Any:
    try:
        return parse(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(key, f"cannot parse {value!r}: {e}") from e


def _parse_range(cast: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(value: str) -> tuple:
        low, sep, high = value.partition("..")
        if not sep:
            raise ValueError("expected 'low..high'")
        return cast(low.strip()), cast(high.strip())

    return parse


def _parse_labels(value: str) -> tuple[str, ...]:
    labels = tuple(label.strip() for label in value.split(",") if label.strip())
    if not labels:
        raise ValueError("expected a comma-separated label list")
    return labels


def _build(model: type, key_hint: str, **kwargs):
    try:
        return model(**kwargs)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or key_hint
        raise ConfigError(key, error["msg"]) from e


def _check_keys(values: dict[str, str], allowed: set[str]) -> None:
    for key in values:
        if key not in allowed:
            raise ConfigError(key, "unknown key")


# -------------------------------------
# Scenarios
# -------------------------------------
def scenario_preset(name: str) -> ScenarioConfig:
    name = SCENARIO_ALIASES.get(name, name)
    if name not in config["scenarios"]:
        raise ConfigError("scenario", f"unknown preset {name!r}")
    return scenario_from_mapping({}, base=name)


def scenario_from_mapping(
    values: dict[str, str], base: str = "scenario1"
) -> ScenarioConfig:
    """Build a scenario from ``key = value`` overrides on top of a preset.

    A ``base`` key inside ``values`` selects the preset to override.
    """
    fields = ("dtc", "gtc", "cttc", "alpha_ct", "alpha_st", "e_max")
    _check_keys(values, {"name", "base", *fields})
    base = SCENARIO_ALIASES.get(values.get("base", base), values.get("base", base))
    if base not in config["scenarios"]:
        raise ConfigError("base", f"unknown preset {base!r}")
    params = dict(config["scenarios"][base])
    for key in fields:
        if key in values:
            params[key] = _convert(key, values[key], float)
    criteria = _build(
        MatchCriteria, "criteria", dtc=params["dtc"], gtc=params["gtc"], cttc=params["cttc"]
    )
    return _build(
        ScenarioConfig,
        "scenario",
        name=values.get("name", base),
        criteria=criteria,
        alpha_ct=params["alpha_ct"],
        alpha_st=params["alpha_st"],
        e_max=params["e_max"],
    )


# -------------------------------------
# Energy
# -------------------------------------
def energy_config_from_mapping(values: dict[str, Any]) -> EnergyConfig:
    allowed = {
        "source",
        "interval",
        "tdp_watts",
        "gpu_power_cmd",
        "replay_path",
        "hardware",
        "region",
        "carbon_table",
    }
    _check_keys(values, allowed)
    kwargs: dict[str, Any] = {
        key: value for key, value in values.items() if value is not None
    }
    if "source" in kwargs:
        kwargs["source"] = _convert("source", kwargs["source"], PowerSourceKind)
    for key in ("interval", "tdp_watts"):
        if key in kwargs:
            kwargs[key] = _convert(key, kwargs[key], float)
    return _build(EnergyConfig, "energy", **kwargs)


# -------------------------------------
# Fixtures
# -------------------------------------
FIXTURE_KEYS: dict[str, Callable[[str], Any]] = {
    "seed": int,
    "n_clips": int,
    "clip_duration": float,
    "classes": _parse_labels,
    "events_per_clip": _parse_range(int),
    "event_duration": _parse_range(float),
}
PERTURB_KEYS: dict[str, Callable[[str], Any]] = {
    "onset_jitter_std": float,
    "deletion_prob": float,
    "substitution_prob": float,
    "insertion_rate": float,
    "insertion_duration": _parse_range(float),
}


def fixture_spec_from_mapping(values: dict[str, str]) -> FixtureSpec:
    _check_keys(values, set(FIXTURE_KEYS) | set(PERTURB_KEYS))
    spec_kwargs = {
        key: _convert(key, values[key], parse)
        for key, parse in FIXTURE_KEYS.items()
        if key in values
    }
    perturb_kwargs = {
        key: _convert(key, values[key], parse)
        for key, parse in PERTURB_KEYS.items()
        if key in values
    }
    perturbation = _build(PerturbSpec, "perturbation", **perturb_kwargs)
    return _build(FixtureSpec, "fixture", perturbation=perturbation, **spec_kwargs)
