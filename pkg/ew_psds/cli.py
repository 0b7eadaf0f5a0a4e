"""Command-line entry point: ``ew-psds <subcommand> ...``.

Exit status is 0 on success, 2 for input or configuration errors and 3 when
a metered command fails.
"""

import argparse
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from loguru import logger
from pydantic import ValidationError

from .config import (
    FIXTURE_KEYS,
    PERTURB_KEYS,
    config,
    energy_config_from_mapping,
    fixture_spec_from_mapping,
    load_config_file,
    scenario_from_mapping,
)
from .energy import meter_run, report_to_text, report_to_tsv
from .exceptions import CommandFailed, ConfigError, InputError
from .fixtures import GENERATOR, generate, sweep
from .formatter import TextReportFormatter, TsvReportFormatter
from .parser import serialize_durations, serialize_events
from .processor import ScoringProcessor, decode_posteriors, write_operating_points
from .psds import ew_psds, result_to_tsv, roc_to_tsv
from .report import build_report, read_system_entry
from .schemas.energy import EnergyReport
from .schemas.fixtures import FixtureSpec
from .schemas.scoring import DecoderConfig, default_thresholds
from .types.energy import PowerSourceKind, RunPhase
from .utils import read_text

LOG_LEVEL_ENV = "EW_PSDS_LOG_LEVEL"
LOG_FORMAT = "<level>{level: <8}</level> | {message}"
DEFAULT_SWEEP_STEPS = 10


def setup_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)


def _parse_window(value: str) -> int | dict[str, int]:
    """``7`` or a per-class list such as ``Speech=5,Dog=9``."""
    if "=" not in value:
        return int(value)
    windows = {}
    for item in value.split(","):
        label, _, window = item.partition("=")
        windows[label.strip()] = int(window)
    return windows


def _parse_thresholds(value: str) -> tuple[float, ...]:
    return tuple(float(t) for t in value.split(",") if t.strip())


def _write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


# -------------------------------------
# Subcommands
# -------------------------------------
def cmd_decode(args: argparse.Namespace) -> int:
    decoder_config = DecoderConfig(
        thresholds=args.thresholds or default_thresholds(),
        median_window=args.median_window,
        hop=args.hop,
    )
    operating_points = decode_posteriors(args.posteriors, decoder_config, args.durations)
    write_operating_points(operating_points, args.outdir)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    overrides = load_config_file(args.config) if args.config else {}
    scenario = scenario_from_mapping(overrides, base=args.scenario)
    processor = ScoringProcessor.from_files(args.gt, args.durations)
    operating_points = processor.load_operating_points(args.predictions)
    result = processor.score(operating_points, scenario, jobs=args.jobs)
    if args.output:
        _write(args.output, result_to_tsv(result))
    if args.roc:
        _write(args.roc, roc_to_tsv(result.curve))
    print(f"psds\t{result.psds:.6f}")
    return 0


def _write_energy_report(report: EnergyReport, args: argparse.Namespace) -> None:
    _write(args.output, report_to_text(report))
    if args.tsv:
        _write(args.tsv, report_to_tsv(report))


def cmd_energy(args: argparse.Namespace) -> int:
    command = list(args.command)
    if command and command[0] == "--":
        command = command[1:]
    if not command:
        raise InputError("energy: no command given, pass it after '--'")
    if args.co2 and not args.region:
        raise InputError("energy: --co2 needs an explicit --region")
    values = load_config_file(args.config) if args.config else {}
    flags = {
        "source": args.source,
        "interval": args.interval,
        "tdp_watts": args.tdp_watts,
        "gpu_power_cmd": args.gpu_power_cmd,
        "replay_path": args.replay,
        "hardware": args.hardware,
        "region": args.region,
        "carbon_table": args.carbon_table,
    }
    values.update({key: value for key, value in flags.items() if value is not None})
    if args.replay and args.source is None:
        values["source"] = PowerSourceKind.EXTERNAL_FILE.value
    energy_config = energy_config_from_mapping(values)
    try:
        report = meter_run(command, energy_config, args.label, RunPhase(args.phase))
    except CommandFailed as e:
        if e.report is not None:
            _write_energy_report(e.report, args)
        raise
    _write_energy_report(report, args)
    print(f"kwh\t{report.kwh:.6f}")
    return 0


def cmd_ewpsds(args: argparse.Namespace) -> int:
    print(f"{ew_psds(args.psds, args.kwh_ref, args.kwh):.6f}")
    return 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    values = load_config_file(args.spec)
    steps_text = values.pop("sweep_steps", str(args.steps))
    try:
        steps = int(steps_text)
    except ValueError:
        raise ConfigError("sweep_steps", f"cannot parse {steps_text!r}") from None
    if steps < 1:
        raise ConfigError("sweep_steps", "must be at least 1")
    if args.seed is not None:
        values["seed"] = str(args.seed)
    spec = fixture_spec_from_mapping(values)

    gt, _ = generate(spec)
    if steps == 1:
        deletion_probs = [spec.perturbation.deletion_prob]
    else:
        deletion_probs = [round(k / (steps - 1), 6) for k in range(steps)]
    outdir = Path(args.outdir)
    _write(outdir / "gt.tsv", serialize_events(gt))
    _write(outdir / "durations.tsv", serialize_durations(gt))
    for label, predictions in sweep(gt, spec.perturbation, spec.seed, deletion_probs):
        _write(outdir / "predictions" / f"{label}.tsv", serialize_events(predictions))
    _write(
        outdir / "metadata.txt",
        f'generator = "{GENERATOR}"\nseed = {spec.seed}\n'
        f"n_clips = {spec.n_clips}\nsweep_steps = {steps}\n",
    )
    logger.info(
        f"cmd_fixtures: {gt.n_events} events, {len(deletion_probs)} prediction sets "
        f"written to {outdir}"
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    entries = [
        read_system_entry(read_text(path), Path(path).stem, Path(path).stem == args.baseline)
        for path in args.entries
    ]
    report = build_report(entries)
    text = TextReportFormatter().format_report(report)
    if args.outdir:
        _write(Path(args.outdir) / "report.tsv", TsvReportFormatter().format_report(report))
        _write(Path(args.outdir) / "report.txt", text)
    print(text, end="")
    return 0


# -------------------------------------
# Parser
# -------------------------------------
def _fixture_spec_help() -> str:
    def show(value) -> str:
        if isinstance(value, tuple) and len(value) == 2 and not isinstance(value[0], str):
            return f"{value[0]}..{value[1]}"
        if isinstance(value, tuple):
            return ",".join(value)
        return str(value)

    spec = FixtureSpec()
    defaults = [
        *(f"{key}={show(getattr(spec, key))}" for key in FIXTURE_KEYS),
        *(f"{key}={show(getattr(spec.perturbation, key))}" for key in PERTURB_KEYS),
    ]
    return "key = value fixture spec; unset keys default to " + ", ".join(defaults)


def build_parser() -> argparse.ArgumentParser:
    formatter = argparse.ArgumentDefaultsHelpFormatter
    decoder_defaults = config["decoder"]
    energy_defaults = config["energy"]
    parser = argparse.ArgumentParser(
        prog="ew-psds",
        description="Energy weighted polyphonic sound detection scoring.",
        formatter_class=formatter,
    )
    parser.add_argument(
        "--log-level",
        default=None,
        help=f"loguru level; falls back to ${LOG_LEVEL_ENV}, then INFO",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    decode_parser = sub.add_parser(
        "decode", help="posteriors to one prediction file per threshold", formatter_class=formatter
    )
    decode_parser.add_argument("posteriors", help="posterior TSV")
    decode_parser.add_argument("--outdir", required=True, help="prediction directory")
    decode_parser.add_argument("--durations", help="durations TSV (default: n_frames * hop)")
    decode_parser.add_argument("--hop", type=float, default=decoder_defaults["hop"], help="frame hop in seconds")
    decode_parser.add_argument(
        "--median-window",
        type=_parse_window,
        default=decoder_defaults["median_window"],
        help="odd median filter window in frames, or per class as Speech=5,Dog=9",
    )
    decode_parser.add_argument(
        "--thresholds",
        type=_parse_thresholds,
        default=None,
        help=f"comma-separated thresholds (default: {decoder_defaults['n_thresholds']} from 0.01 to 0.99)",
    )
    decode_parser.set_defaults(handler=cmd_decode)

    score_parser = sub.add_parser("score", help="PSDS of a prediction directory", formatter_class=formatter)
    score_parser.add_argument("--gt", required=True, help="ground truth TSV")
    score_parser.add_argument("--durations", required=True, help="durations TSV")
    score_parser.add_argument("--predictions", required=True, help="directory of prediction TSVs")
    score_parser.add_argument(
        "--scenario",
        default="scenario1",
        help="preset: scenario1 (dtc=gtc=0.7, cttc=0.3, alpha_ct=0) or scenario2 "
        "(dtc=gtc=0.1, cttc=0.3, alpha_ct=0.5); both alpha_st=1, e_max=100",
    )
    score_parser.add_argument("--config", help="key = value overrides of the scenario")
    score_parser.add_argument("--output", help="result TSV")
    score_parser.add_argument("--roc", help="PSD-ROC TSV")
    score_parser.add_argument("--jobs", type=int, default=None, help="worker threads (default: available parallelism)")
    score_parser.set_defaults(handler=cmd_score)

    energy_parser = sub.add_parser(
        "energy", aliases=["meter"], help="meter the energy of a command", formatter_class=formatter
    )
    energy_parser.add_argument(
        "--source",
        choices=[kind.value for kind in PowerSourceKind],
        default=None,
        help=f"power source (default: {PowerSourceKind.CPU_TDP_MODEL.value})",
    )
    energy_parser.add_argument(
        "--interval",
        type=float,
        default=None,
        help=f"sampling interval in seconds, at least {energy_defaults['min_interval']} "
        f"(default: {energy_defaults['interval']})",
    )
    energy_parser.add_argument(
        "--tdp-watts", type=float, default=None, help=f"CPU TDP (default: {energy_defaults['tdp_watts']})"
    )
    energy_parser.add_argument("--gpu-power-cmd", help="command printing watts, one value per line")
    energy_parser.add_argument("--replay", help="timestamp/watts TSV to replay")
    energy_parser.add_argument("--hardware", help="hardware descriptor (default: detected)")
    energy_parser.add_argument("--region", help="carbon intensity region")
    energy_parser.add_argument("--co2", action="store_true", help="require a CO2 estimate")
    energy_parser.add_argument("--carbon-table", help=f"region table (default: {energy_defaults['carbon_table']})")
    energy_parser.add_argument("--config", help="key = value energy settings")
    energy_parser.add_argument("--label", default="", help="run label (default: the command line)")
    energy_parser.add_argument("--phase", choices=[p.value for p in RunPhase], default=RunPhase.INFERENCE.value)
    energy_parser.add_argument("--output", default="energy_report.txt", help="key = value report")
    energy_parser.add_argument("--tsv", help="one-row TSV report")
    energy_parser.add_argument("command", nargs=argparse.REMAINDER, help="command to run, after '--'")
    energy_parser.set_defaults(handler=cmd_energy)

    ewpsds_parser = sub.add_parser(
        "ewpsds", aliases=["combine"], help="PSDS * kwh_ref / kwh", formatter_class=formatter
    )
    ewpsds_parser.add_argument("psds", type=float)
    ewpsds_parser.add_argument("kwh_ref", type=float, help="baseline kWh")
    ewpsds_parser.add_argument("kwh", type=float, help="submission kWh")
    ewpsds_parser.set_defaults(handler=cmd_ewpsds)

    fixtures_parser = sub.add_parser(
        "fixtures", aliases=["generate"], help="synthetic ground truth and predictions", formatter_class=formatter
    )
    fixtures_parser.add_argument("--spec", required=True, help=_fixture_spec_help())
    fixtures_parser.add_argument("--seed", type=int, default=None, help="overrides the seed set in --spec")
    fixtures_parser.add_argument("--outdir", required=True)
    fixtures_parser.add_argument(
        "--steps", type=int, default=DEFAULT_SWEEP_STEPS, help="deletion_prob sweep steps from 0 to 1"
    )
    fixtures_parser.set_defaults(handler=cmd_fixtures)

    report_parser = sub.add_parser("report", help="PSDS, kWh and EW-PSDS table", formatter_class=formatter)
    report_parser.add_argument("entries", nargs="+", help="one TSV per system, named after the system")
    report_parser.add_argument("--baseline", default="baseline", help="name of the baseline system")
    report_parser.add_argument("--outdir", help="directory for report.tsv and report.txt")
    report_parser.set_defaults(handler=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or os.environ.get(LOG_LEVEL_ENV, "INFO"))
    try:
        return args.handler(args)
    except CommandFailed as e:
        logger.error(f"{args.subcommand}: {e}")
        return 3
    except (InputError, ValidationError, FileNotFoundError) as e:
        logger.error(f"{args.subcommand}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
