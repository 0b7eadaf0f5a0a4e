import math
from collections import Counter

import numpy as np
import pandas as pd
from loguru import logger

from .base import BaseMatcher
from .exceptions import UnknownClip, VocabularyMismatch
from .schemas.core import Clip, ClipSet, Event
from .schemas.scoring import MatchCounts, MatchCriteria


def intersection(a: Event, b: Event) -> float:
    return max(0.0, min(a.offset, b.offset) - max(a.onset, b.onset))


def _by_label(clip: Clip | None) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    grouped: dict[str, list[Event]] = {}
    for event in clip.events if clip else ():
        grouped.setdefault(event.label, []).append(event)
    return {
        label: (
            np.array([e.onset for e in events]),
            np.array([e.offset for e in events]),
        )
        for label, events in grouped.items()
    }


def _intersections(
    a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]
) -> np.ndarray:
    """Pairwise intersection lengths, rows indexed by ``a`` and columns by ``b``."""
    (a_on, a_off), (b_on, b_off) = a, b
    overlap = np.minimum(a_off[:, None], b_off[None, :]) - np.maximum(
        a_on[:, None], b_on[None, :]
    )
    return np.maximum(overlap, 0.0)


def _row_sums(matrix: np.ndarray) -> np.ndarray:
    # fsum is exactly rounded, so the sums do not depend on summation order.
    return np.array([math.fsum(row) for row in matrix], dtype=float)


class IntersectionMatcher(BaseMatcher):
    """Intersection-based matching with detection, ground-truth and
    cross-trigger tolerance criteria.

    Intersections are summed over every same-class counterpart in the clip,
    not taken from a single best match.
    """

    def match(
        self,
        predictions: ClipSet,
        gt: ClipSet,
        criteria: MatchCriteria,
    ) -> MatchCounts:
        if predictions.vocabulary != gt.vocabulary:
            raise VocabularyMismatch(
                f"IntersectionMatcher: prediction vocabulary {list(predictions.vocabulary)} "
                f"differs from ground truth {list(gt.vocabulary)}"
            )
        unknown = sorted(set(predictions.clips) - set(gt.clips))
        if unknown:
            raise UnknownClip(
                f"IntersectionMatcher: {len(unknown)} predicted clip(s) not in ground "
                f"truth, first: {unknown[0]}"
            )

        n_gt: Counter = Counter()
        tp: Counter = Counter()
        fp: Counter = Counter()
        ct: Counter = Counter()
        for clip_id, gt_clip in gt.clips.items():
            truth = _by_label(gt_clip)
            detected = _by_label(predictions.clips.get(clip_id))
            for label, (on, _) in truth.items():
                n_gt[label] += len(on)
            valid_by_label = {}
            for label, pred in detected.items():
                pred_duration = pred[1] - pred[0]
                if label in truth:
                    overlap = _intersections(pred, truth[label])
                    valid = _row_sums(overlap) / pred_duration >= criteria.dtc
                else:
                    overlap = None
                    valid = np.full(len(pred_duration), 0.0 >= criteria.dtc)
                valid_by_label[label] = valid
                fp[label] += int((~valid).sum())
                if overlap is not None:
                    gt_on, gt_off = truth[label]
                    covered = _row_sums(overlap[valid].T) if valid.any() else 0.0
                    tp[label] += int(
                        (np.asarray(covered) / (gt_off - gt_on) >= criteria.gtc).sum()
                    )
            for label, (gt_on, _) in truth.items():
                if label not in detected and 0.0 >= criteria.gtc:
                    tp[label] += len(gt_on)

            for label, pred in detected.items():
                invalid = ~valid_by_label[label]
                if not invalid.any():
                    continue
                failed = (pred[0][invalid], pred[1][invalid])
                for other, (gt_on, gt_off) in truth.items():
                    if other == label:
                        continue
                    ratio = _intersections(failed, (gt_on, gt_off)) / (gt_off - gt_on)
                    ct[(label, other)] += int((ratio >= criteria.cttc).sum())

        classes = tuple(
            sorted(set(gt.vocabulary) | set(gt.labels) | set(predictions.labels))
        )
        counts = MatchCounts(
            classes=classes, n_gt=dict(n_gt), tp=dict(tp), fp=dict(fp), ct=dict(ct)
        ).normalized()
        logger.debug(
            f"IntersectionMatcher: match: tp={sum(counts.tp.values())} "
            f"fp={sum(counts.fp.values())} ct={sum(counts.ct.values())}"
        )
        return counts


def match_operating_point(
    predictions: ClipSet, gt: ClipSet, criteria: MatchCriteria
) -> MatchCounts:
    return IntersectionMatcher().match(predictions, gt, criteria)


def counts_to_tsv(counts: MatchCounts) -> str:
    """Diagnostic dump: a per-class table, a blank line, then the cross-trigger matrix."""
    per_class = pd.DataFrame(
        [
            (c, counts.n_gt.get(c, 0), counts.tp.get(c, 0), counts.fp.get(c, 0))
            for c in counts.classes
        ],
        columns=["class", "n_gt", "tp", "fp"],
    )
    matrix = pd.DataFrame(0, index=list(counts.classes), columns=list(counts.classes))
    for (c, c_gt), value in counts.ct.items():
        matrix.loc[c, c_gt] = value
    matrix.index.name = "ct"
    return (
        per_class.to_csv(sep="\t", index=False, lineterminator="\n")
        + "\n"
        + matrix.to_csv(sep="\t", lineterminator="\n")
    )
