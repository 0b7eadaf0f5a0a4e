import re
from collections.abc import Iterator
from pathlib import Path

from .exceptions import MalformedRow

SECONDS_PER_HOUR = 3600.0
JOULES_PER_KWH = 3.6e6

_NUMBER_IN_NAME = re.compile(r"(\d+(?:\.\d+)?)$")


def format_float(value: float) -> str:
    """Render a float with up to 9 significant digits."""
    return f"{value:.9g}"


def iter_tsv_rows(
    text: str, header: tuple[str, ...]
) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, fields)`` for every data row of a TSV text.

    The header must start with ``header``; line numbers are 1-based with the
    header on line 1. Blank lines are skipped.
    """
    lines = text.splitlines()
    if not lines or lines[0].rstrip("\r").split("\t")[: len(header)] != list(header):
        found = lines[0].rstrip("\r") if lines else ""
        raise MalformedRow(
            f"expected header {'<TAB>'.join(header)!r}, found {found!r}", line=1
        )
    for index, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        yield index, line.split("\t")


def parse_float(value: str, column: str, line: int) -> float:
    try:
        number = float(value)
    except ValueError:
        raise MalformedRow(f"{column} {value!r} is not a number", line=line) from None
    if number != number or number in (float("inf"), float("-inf")):
        raise MalformedRow(f"{column} {value!r} is not finite", line=line)
    return number


def read_text(path: str | Path) -> str:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")
    return path.read_text(encoding="utf-8")


def threshold_from_name(stem: str) -> float | None:
    """Extract the trailing number of a file stem such as ``pred_th0.51``."""
    match = _NUMBER_IN_NAME.search(stem)
    return float(match.group(1)) if match else None
