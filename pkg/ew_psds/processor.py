from pathlib import Path

from loguru import logger

from .decoder import decode
from .exceptions import UnknownClip
from .parser import (
    merge,
    parse_durations,
    parse_ground_truth,
    parse_posteriors,
    parse_predictions,
    serialize_events,
)
from .psds import score_scenario
from .schemas.core import ClipSet
from .schemas.scoring import DecoderConfig, OperatingPoint, PsdsResult, ScenarioConfig
from .utils import read_text, threshold_from_name


def decode_posteriors(
    posteriors_path: str | Path,
    config: DecoderConfig | None = None,
    durations_path: str | Path | None = None,
) -> list[OperatingPoint]:
    config = config or DecoderConfig()
    matrices = parse_posteriors(read_text(posteriors_path), hop=config.hop)
    durations = parse_durations(read_text(durations_path)) if durations_path else None
    return decode(matrices, config, durations)


def write_operating_points(
    operating_points: list[OperatingPoint], outdir: str | Path
) -> list[Path]:
    """Write one ``<name>.tsv`` prediction file per operating point."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for op in operating_points:
        path = outdir / f"{op.name or f'pred_th{op.threshold:.2f}'}.tsv"
        path.write_text(serialize_events(op.predictions), encoding="utf-8")
        paths.append(path)
    logger.info(f"write_operating_points: {len(paths)} files written to {outdir}")
    return paths


class ScoringProcessor:
    """Scores prediction sets against one ground truth."""

    def __init__(self, gt: ClipSet):
        self.gt = gt

    @classmethod
    def from_files(
        cls, gt_path: str | Path, durations_path: str | Path, strict: bool = True
    ) -> "ScoringProcessor":
        events = parse_ground_truth(read_text(gt_path), strict=strict)
        gt = merge(events, parse_durations(read_text(durations_path)))
        logger.info(
            f"ScoringProcessor: from_files: {gt.n_events} events in {len(gt.clips)} clips, "
            f"{gt.total_duration:.1f} s"
        )
        return cls(gt)

    def load_predictions(self, path: str | Path) -> ClipSet:
        predictions = parse_predictions(read_text(path))
        unknown = sorted(set(predictions.clips) - set(self.gt.clips))
        if unknown:
            raise UnknownClip(
                f"ScoringProcessor: {Path(path).name}: clip {unknown[0]} is not in "
                "the ground truth"
            )
        return merge(predictions, self.gt.durations, vocabulary=self.gt.vocabulary)

    def load_operating_points(self, pred_dir: str | Path) -> list[OperatingPoint]:
        """One operating point per ``*.tsv`` file, in file-name order.

        The threshold comes from a trailing number in the file name
        (``pred_th0.51.tsv``), otherwise from the file's position.
        """
        pred_dir = Path(pred_dir)
        if not pred_dir.is_dir():
            raise FileNotFoundError(f"Prediction directory not found: {pred_dir}")
        operating_points = []
        for index, path in enumerate(sorted(pred_dir.glob("*.tsv"))):
            threshold = threshold_from_name(path.stem)
            operating_points.append(
                OperatingPoint(
                    threshold=float(index) if threshold is None else threshold,
                    predictions=self.load_predictions(path),
                    name=path.stem,
                )
            )
        logger.info(
            f"ScoringProcessor: load_operating_points: {len(operating_points)} "
            f"operating points from {pred_dir}"
        )
        return operating_points

    def score(
        self,
        operating_points: list[OperatingPoint],
        scenario: ScenarioConfig,
        jobs: int | None = None,
    ) -> PsdsResult:
        return score_scenario(self.gt, operating_points, scenario, jobs=jobs)
