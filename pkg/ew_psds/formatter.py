import pandas as pd
from loguru import logger

from .base import BaseReportFormatter
from .schemas.report import Report

ROW_COLUMNS = [
    "system",
    "split",
    "scenario",
    "psds",
    "kwh",
    "energy_ratio",
    "ew_psds",
    "is_baseline",
]


def _rows_frame(report: Report) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in report.rows], columns=ROW_COLUMNS)


class TsvReportFormatter(BaseReportFormatter):
    """Long-format TSV with every value at full precision."""

    def format_report(
        self,
        report: Report,
        **kwargs,
    ) -> str:
        frame = _rows_frame(report)
        frame["is_baseline"] = frame["is_baseline"].astype(int)
        return frame.to_csv(sep="\t", index=False, lineterminator="\n")


class TextReportFormatter(BaseReportFormatter):
    """One aligned table per split (systems by PSDS, kWh and EW-PSDS columns), then the summary."""

    def format_report(
        self,
        report: Report,
        **kwargs,
    ) -> str:
        decimals = kwargs.get("decimals", 3)
        if not report.rows:
            raise ValueError("TextReportFormatter: format_report: report has no rows")
        frame = _rows_frame(report)
        sections = []
        for split in report.splits:
            part = frame[frame["split"] == split]
            if part.empty:
                continue
            psds = part.pivot(index="system", columns="scenario", values="psds")
            weighted = part.pivot(index="system", columns="scenario", values="ew_psds")
            kwh = part.groupby("system")["kwh"].first()
            table = pd.concat(
                [
                    psds.add_prefix("PSDS "),
                    kwh.rename("kWh"),
                    weighted.add_prefix("EW-PSDS "),
                ],
                axis=1,
            ).reindex([s for s in report.systems if s in set(part["system"])])
            table.index.name = None
            body = table.to_string(
                float_format=lambda v: f"{v:.{decimals}f}", na_rep="-"
            )
            sections.append(f"[{split}]\n{body}")

        lines = [
            f"{s.split} / {s.scenario}: best PSDS {s.best_psds}, best EW-PSDS {s.best_ew_psds}"
            for s in report.summary
        ]
        ratios = frame.drop_duplicates(["system", "split"])
        lines += [
            f"{r.system} / {r.split}: kWh ratio to baseline {r.energy_ratio:.{decimals}f}"
            for r in ratios.itertuples()
            if not r.is_baseline
        ]
        if lines:
            sections.append("[summary]\n" + "\n".join(lines))
        logger.debug(f"TextReportFormatter: format_report: {len(sections)} sections")
        return "\n\n".join(sections) + "\n"
