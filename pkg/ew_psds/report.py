from collections.abc import Iterable, Sequence

from loguru import logger

from .exceptions import InputError, MalformedRow, MissingSplit, NoBaseline
from .psds import ew_psds
from .schemas.report import EfficiencySummary, Report, ReportRow, SystemEntry
from .utils import parse_float

PSDS_HEADER = ("split", "scenario", "psds")
KWH_HEADER = ("split", "kwh")
SPLIT_ORDER = ("dev-test", "eval")


def _blocks(text: str) -> Iterable[list[tuple[int, list[str]]]]:
    """Blank-line separated blocks of ``(line_number, fields)``; ``#`` lines are skipped."""
    block: list[tuple[int, list[str]]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if line.startswith("#"):
            continue
        if not line.strip():
            if block:
                yield block
            block = []
            continue
        block.append((line_no, line.split("\t")))
    if block:
        yield block


def read_system_entry(text: str, name: str, is_baseline: bool = False) -> SystemEntry:
    """Parse a system file: a ``split scenario psds`` block and a ``split kwh`` block."""
    psds: dict[tuple[str, str], float] = {}
    kwh: dict[str, float] = {}
    for block in _blocks(text):
        (header_line, header), rows = block[0], block[1:]
        if tuple(header) == PSDS_HEADER:
            for line, fields in rows:
                if len(fields) != len(PSDS_HEADER):
                    raise MalformedRow(f"{name}: expected 3 columns", line=line)
                split, scenario, value = fields
                psds[(split, scenario)] = parse_float(value, "psds", line)
        elif tuple(header) == KWH_HEADER:
            for line, fields in rows:
                if len(fields) != len(KWH_HEADER):
                    raise MalformedRow(f"{name}: expected 2 columns", line=line)
                kwh[fields[0]] = parse_float(fields[1], "kwh", line)
        else:
            raise MalformedRow(
                f"{name}: unknown block header {'<TAB>'.join(header)!r}", line=header_line
            )
    logger.debug(f"read_system_entry: {name}: {len(psds)} scores, {len(kwh)} kWh values")
    return SystemEntry(name=name, psds=psds, kwh=kwh, is_baseline=is_baseline)


def _ordered_splits(splits: Iterable[str]) -> tuple[str, ...]:
    splits = set(splits)
    known = [s for s in SPLIT_ORDER if s in splits]
    return tuple(known + sorted(splits - set(SPLIT_ORDER)))


def _best(rows: Sequence[ReportRow], key: str) -> str:
    # max keeps the first of equal values, so ties go to the earlier system.
    return max(rows, key=lambda row: getattr(row, key)).system


def build_report(entries: Sequence[SystemEntry]) -> Report:
    """Score table with EW-PSDS = PSDS * kWh_baseline / kWh_entry per split and scenario.

    Rows are ordered baseline first, then by system name; the input order of
    ``entries`` does not matter.
    """
    baselines = [e for e in entries if e.is_baseline]
    if len(baselines) != 1:
        raise NoBaseline(
            f"build_report: expected exactly one baseline entry, found {len(baselines)}"
        )
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise InputError(f"build_report: duplicate system names in {sorted(names)}")
    baseline = baselines[0]
    systems = [baseline] + sorted(
        (e for e in entries if not e.is_baseline), key=lambda e: e.name
    )
    splits = _ordered_splits(split for e in entries for split in e.splits)
    scenarios = tuple(sorted({scenario for e in entries for _, scenario in e.psds}))

    for split in splits:
        if split not in baseline.kwh:
            raise MissingSplit(
                f"build_report: baseline {baseline.name} has no kWh for split {split}"
            )
    for entry in systems:
        for split, _ in entry.psds:
            if split not in entry.kwh:
                raise MissingSplit(f"build_report: {entry.name} has no kWh for split {split}")

    rows = []
    for entry in systems:
        for split in splits:
            for scenario in scenarios:
                if (split, scenario) not in entry.psds:
                    continue
                value = entry.psds[(split, scenario)]
                kwh_entry, kwh_baseline = entry.kwh[split], baseline.kwh[split]
                weighted = ew_psds(value, kwh_baseline, kwh_entry)
                rows.append(
                    ReportRow(
                        system=entry.name,
                        split=split,
                        scenario=scenario,
                        psds=value,
                        kwh=kwh_entry,
                        energy_ratio=kwh_entry / kwh_baseline,
                        ew_psds=weighted,
                        is_baseline=entry.is_baseline,
                    )
                )

    summary = []
    for split in splits:
        for scenario in scenarios:
            cell = [r for r in rows if (r.split, r.scenario) == (split, scenario)]
            if cell:
                summary.append(
                    EfficiencySummary(
                        split=split,
                        scenario=scenario,
                        best_psds=_best(cell, "psds"),
                        best_ew_psds=_best(cell, "ew_psds"),
                    )
                )
    logger.info(
        f"build_report: {len(systems)} systems, {len(splits)} splits, {len(rows)} rows"
    )
    return Report(
        splits=splits,
        scenarios=scenarios,
        systems=tuple(e.name for e in systems),
        rows=tuple(rows),
        summary=tuple(summary),
    )
