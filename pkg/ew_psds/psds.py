import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from loguru import logger

from .energy import normalize
from .exceptions import MissingOperatingPoints, ZeroDuration
from .matching import match_operating_point
from .schemas.core import ClipSet
from .schemas.scoring import (
    ClassRates,
    EffectiveRates,
    MatchCounts,
    OperatingPoint,
    PsdsResult,
    RocCurve,
    ScenarioConfig,
)
from .utils import SECONDS_PER_HOUR


# -------------------------------------
# Rates
# -------------------------------------
def rates(counts: MatchCounts, gt: ClipSet) -> ClassRates:
    """Per-class TP ratio, FP rate and cross-trigger rates (both per hour).

    Cross-trigger rates are normalized by the summed ground-truth duration
    of the triggered class.
    """
    total = gt.total_duration
    if total <= 0:
        raise ZeroDuration("rates: ground truth has zero total duration")
    hours = total / SECONDS_PER_HOUR
    durations: dict[str, list[float]] = {}
    for _, event in gt.events():
        durations.setdefault(event.label, []).append(event.duration)
    gt_hours = {
        label: math.fsum(seconds) / SECONDS_PER_HOUR
        for label, seconds in durations.items()
    }

    scored = tuple(c for c in counts.classes if counts.n_gt.get(c, 0) > 0)
    tpr = {
        c: counts.tp.get(c, 0) / counts.n_gt[c] if c in scored else 0.0
        for c in counts.classes
    }
    fpr = {c: counts.fp.get(c, 0) / hours for c in counts.classes}
    ctr = {
        (c, c_gt): count / gt_hours[c_gt] if gt_hours.get(c_gt) else 0.0
        for (c, c_gt), count in counts.ct.items()
    }
    return ClassRates(classes=counts.classes, scored=scored, tpr=tpr, fpr=fpr, ctr=ctr)


def effective_rates(class_rates: ClassRates, alpha_ct: float) -> EffectiveRates:
    """eFPR(c) = fpr(c) + alpha_ct * mean over other scored classes of ctr(c, c')."""
    efpr = {}
    for c in class_rates.classes:
        others = [c_gt for c_gt in class_rates.scored if c_gt != c]
        mean_ctr = (
            math.fsum(class_rates.ctr.get((c, c_gt), 0.0) for c_gt in others) / len(others)
            if others
            else 0.0
        )
        efpr[c] = class_rates.fpr[c] + alpha_ct * mean_ctr
    return EffectiveRates(
        classes=class_rates.classes,
        scored=class_rates.scored,
        tpr=dict(class_rates.tpr),
        efpr=efpr,
    )


# -------------------------------------
# PSD-ROC
# -------------------------------------
def _class_envelope(
    points: list[tuple[float, float]], breakpoints: np.ndarray
) -> np.ndarray:
    """Best TP ratio among points with eFPR <= e, for every breakpoint e (0 if none)."""
    points = sorted(points)
    efpr = np.array([e for e, _ in points])
    best = np.maximum.accumulate(np.array([t for _, t in points]))
    index = np.searchsorted(efpr, breakpoints, side="right") - 1
    return np.where(index >= 0, best[np.clip(index, 0, None)], 0.0)


def build_psd_roc(
    operating_rates: Sequence[EffectiveRates], e_max: float, alpha_st: float = 0.0
) -> RocCurve:
    """PSD-ROC as a right-continuous step function on ``[0, e_max]``.

    Each class gets the upper envelope of its (eFPR, TPR) points; the curve
    is the cross-class mean minus ``alpha_st`` times the population standard
    deviation, floored at 0.
    """
    if not operating_rates:
        raise MissingOperatingPoints("build_psd_roc: no operating points")
    scored = operating_rates[0].scored
    efprs = {r.efpr[c] for r in operating_rates for c in scored}
    breakpoints = np.array(sorted({0.0, e_max} | {e for e in efprs if e < e_max}))

    per_class = {
        c: _class_envelope([(r.efpr[c], r.tpr[c]) for r in operating_rates], breakpoints)
        for c in scored
    }
    if per_class:
        stacked = np.vstack([per_class[c] for c in scored])
        values = stacked.mean(axis=0) - alpha_st * stacked.std(axis=0)
    else:
        logger.warning("build_psd_roc: no class has ground truth, curve is zero")
        values = np.zeros(len(breakpoints))
    values = np.clip(values, 0.0, 1.0)
    return RocCurve(
        efpr=tuple(float(e) for e in breakpoints),
        values=tuple(float(v) for v in values),
        classes=scored,
        per_class={c: tuple(float(v) for v in per_class[c]) for c in scored},
    )


def psds(curve: RocCurve, e_max: float) -> float:
    """Normalized area under the step curve on ``[0, e_max]``, computed exactly.

    The area is summed as ``r_last * e_max - sum(e_k * (r_k - r_{k-1}))`` so a
    constant curve integrates to exactly its value.
    """
    terms = []
    previous = 0.0
    last = 0.0
    for e, value in zip(curve.efpr, curve.values):
        if e > e_max:
            break
        terms.append(-e * (value - previous))
        previous = last = value
    terms.append(last * e_max)
    return min(1.0, max(0.0, math.fsum(terms) / e_max))


def ew_psds(psds_value: float, kwh_baseline: float, kwh_submission: float) -> float:
    """Energy weighted PSDS: ``psds * kwh_baseline / kwh_submission`` (not clamped)."""
    return psds_value * normalize(kwh_submission, kwh_baseline)


# -------------------------------------
# Scenario scoring
# -------------------------------------
def match_operating_points(
    gt: ClipSet,
    operating_points: Sequence[OperatingPoint],
    scenario: ScenarioConfig,
    jobs: int | None = None,
) -> list[MatchCounts]:
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1:
        return [
            match_operating_point(op.predictions, gt, scenario.criteria)
            for op in operating_points
        ]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(
            executor.map(
                lambda op: match_operating_point(op.predictions, gt, scenario.criteria),
                operating_points,
            )
        )


def score_scenario(
    gt: ClipSet,
    operating_points: Sequence[OperatingPoint],
    scenario: ScenarioConfig,
    jobs: int | None = None,
) -> PsdsResult:
    if not operating_points:
        raise MissingOperatingPoints(f"score_scenario: no operating points for {scenario.name}")
    counts = match_operating_points(gt, operating_points, scenario, jobs)
    operating_rates = [effective_rates(rates(c, gt), scenario.alpha_ct) for c in counts]
    curve = build_psd_roc(operating_rates, scenario.e_max, scenario.alpha_st)
    value = psds(curve, scenario.e_max)
    logger.info(
        f"score_scenario: {scenario.name}: PSDS {value:.6f} over "
        f"{len(operating_points)} operating points"
    )
    return PsdsResult(
        scenario=scenario.name,
        psds=value,
        curve=curve,
        n_operating_points=len(operating_points),
    )


def result_to_tsv(result: PsdsResult) -> str:
    frame = pd.DataFrame(
        [(result.scenario, result.psds, result.n_operating_points)],
        columns=["scenario", "psds", "n_operating_points"],
    )
    return frame.to_csv(sep="\t", index=False, float_format="%.6f", lineterminator="\n")


def roc_to_tsv(curve: RocCurve) -> str:
    frame = pd.DataFrame({"efpr": curve.efpr, "r": curve.values})
    for c in curve.classes:
        frame[c] = curve.per_class[c]
    return frame.to_csv(sep="\t", index=False, float_format="%.9g", lineterminator="\n")
