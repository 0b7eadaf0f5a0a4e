"""Synthetic annotation scenarios and a brute-force scoring oracle.

Randomness comes from numpy's PCG64 bit generator. A spec or perturbation
seed is expanded with ``SeedSequence(seed, spawn_key=(stream,)).spawn(n)``
(stream 0 for generation, 1 for perturbation) and clip ``k`` (in sorted
clip-id order for perturbations, generation order otherwise) draws from
child ``k``, so clips can be generated independently and in any order.
"""

import math
import statistics
from collections.abc import Sequence

import numpy as np
from loguru import logger

from .base import BaseMatcher
from .exceptions import InstanceTooLarge, UnknownClip, VocabularyMismatch
from .parser import merge
from .schemas.core import Clip, ClipSet, Event
from .schemas.fixtures import FixtureSpec, PerturbSpec
from .schemas.scoring import MatchCounts, MatchCriteria, OperatingPoint, ScenarioConfig

GENERATOR = "numpy.random.PCG64, SeedSequence(seed, spawn_key=(stream,)).spawn(n_clips)"
RESOLUTION = 3  # decimals kept on every generated time (1 ms)
MAX_ORACLE_EVENTS = 8
GENERATE_STREAM = 0
PERTURB_STREAM = 1


def _clip_rngs(seed: int, n: int, stream: int) -> list[np.random.Generator]:
    root = np.random.SeedSequence(seed, spawn_key=(stream,))
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(n)]


def _draw_event(
    rng: np.random.Generator,
    label: str,
    duration_range: tuple[float, float],
    clip_duration: float,
) -> Event:
    low, high = duration_range
    length = rng.uniform(min(low, clip_duration), min(high, clip_duration))
    length = max(round(length, RESOLUTION), 10**-RESOLUTION)
    onset = round(rng.uniform(0.0, max(clip_duration - length, 0.0)), RESOLUTION)
    offset = min(round(onset + length, RESOLUTION), clip_duration)
    return Event(onset=onset, offset=offset, label=label)


def _sort_key(event: Event) -> tuple[float, float, str]:
    return event.onset, event.offset, event.label


# -------------------------------------
# Generation
# -------------------------------------
def generate(spec: FixtureSpec) -> tuple[ClipSet, dict[str, float]]:
    """Ground truth and clip durations for ``spec``; same spec, same output."""
    classes = tuple(sorted(set(spec.classes)))
    durations: dict[str, float] = {}
    clips: dict[str, Clip] = {}
    low, high = spec.events_per_clip
    for index, rng in enumerate(_clip_rngs(spec.seed, spec.n_clips, GENERATE_STREAM)):
        clip_id = f"clip_{index:05d}.wav"
        durations[clip_id] = spec.clip_duration
        n_events = int(rng.integers(low, high, endpoint=True))
        events = [
            _draw_event(
                rng,
                classes[int(rng.integers(len(classes)))],
                spec.event_duration,
                spec.clip_duration,
            )
            for _ in range(n_events)
        ]
        if events:
            clips[clip_id] = Clip(id=clip_id, events=tuple(sorted(events, key=_sort_key)))
    gt = merge(ClipSet(clips=clips, vocabulary=classes), durations)
    logger.debug(
        f"generate: seed {spec.seed}: {gt.n_events} events in {spec.n_clips} clips"
    )
    return gt, durations


def perturb(gt: ClipSet, perturbation: PerturbSpec, seed: int) -> ClipSet:
    """Degrade ground truth into predictions.

    Steps run in a fixed order: deletion, label substitution (uniform over
    the other classes), Gaussian jitter of onset and offset (clipped to the
    clip, degenerate events dropped), Poisson insertions. Per-event random
    draws are taken for every ground-truth event whatever the probabilities,
    so with one seed a larger ``deletion_prob`` deletes a superset of events.
    """
    classes = gt.vocabulary
    clip_ids = sorted(gt.clips)
    clips: dict[str, Clip] = {}
    for clip_id, rng in zip(clip_ids, _clip_rngs(seed, len(clip_ids), PERTURB_STREAM)):
        clip = gt.clips[clip_id]
        duration = clip.duration if clip.duration is not None else max(
            (e.offset for e in clip.events), default=0.0
        )
        n = len(clip.events)
        deletion_draw = rng.random(n)
        substitution_draw = rng.random(n)
        substitute_index = rng.integers(0, max(len(classes) - 1, 1), size=n)
        jitter = rng.normal(0.0, perturbation.onset_jitter_std, size=(n, 2))

        events = []
        for i, event in enumerate(clip.events):
            if deletion_draw[i] < perturbation.deletion_prob:
                continue
            label = event.label
            if substitution_draw[i] < perturbation.substitution_prob:
                others = [c for c in classes if c != label]
                if others:
                    label = others[int(substitute_index[i]) % len(others)]
            onset, offset = event.onset, event.offset
            if perturbation.onset_jitter_std > 0:
                onset = round(min(max(onset + jitter[i, 0], 0.0), duration), RESOLUTION)
                offset = round(min(max(offset + jitter[i, 1], 0.0), duration), RESOLUTION)
                if offset <= onset:
                    continue
            events.append(Event(onset=onset, offset=offset, label=label))

        n_inserted = int(rng.poisson(perturbation.insertion_rate))
        if classes and duration > 0:
            for _ in range(n_inserted):
                label = classes[int(rng.integers(len(classes)))]
                events.append(
                    _draw_event(rng, label, perturbation.insertion_duration, duration)
                )
        clips[clip_id] = Clip(
            id=clip_id, duration=clip.duration, events=tuple(sorted(events, key=_sort_key))
        )
    return ClipSet(clips=clips, vocabulary=gt.vocabulary)


def sweep(
    gt: ClipSet,
    perturbation: PerturbSpec,
    seed: int,
    deletion_probs: Sequence[float],
) -> list[tuple[str, ClipSet]]:
    """Perturbed predictions at several deletion probabilities, emulating a threshold sweep."""
    return [
        (
            f"pred_del{p:.2f}",
            perturb(gt, perturbation.model_copy(update={"deletion_prob": p}), seed),
        )
        for p in deletion_probs
    ]


# -------------------------------------
# Brute-force oracle
# -------------------------------------
class BruteForceMatcher(BaseMatcher):
    """Direct evaluation of the matching definitions over every event pair.

    Kept independent from :mod:`ew_psds.matching`; only usable on small clips.
    """

    def match(
        self,
        predictions: ClipSet,
        gt: ClipSet,
        criteria: MatchCriteria,
    ) -> MatchCounts:
        if predictions.vocabulary != gt.vocabulary:
            raise VocabularyMismatch("BruteForceMatcher: vocabularies differ")
        for clip_id in predictions.clips:
            if clip_id not in gt.clips:
                raise UnknownClip(f"BruteForceMatcher: unknown clip {clip_id}")
        n_gt: dict[str, int] = {}
        tp: dict[str, int] = {}
        fp: dict[str, int] = {}
        ct: dict[tuple[str, str], int] = {}

        for clip_id in gt.clips:
            truth = list(gt.clips[clip_id].events)
            predicted = list(predictions.clips[clip_id].events) if clip_id in predictions.clips else []
            for events in (truth, predicted):
                for label in {e.label for e in events}:
                    if sum(e.label == label for e in events) > MAX_ORACLE_EVENTS:
                        raise InstanceTooLarge(
                            f"BruteForceMatcher: {clip_id} has more than "
                            f"{MAX_ORACLE_EVENTS} events of class {label}"
                        )

            overlap = [
                [
                    max(0.0, min(g.offset, p.offset) - max(g.onset, p.onset))
                    for p in predicted
                ]
                for g in truth
            ]

            # Detection tolerance, per prediction.
            accepted = []
            for j, p in enumerate(predicted):
                hit = math.fsum(
                    overlap[i][j] for i, g in enumerate(truth) if g.label == p.label
                )
                accepted.append(hit / (p.offset - p.onset) >= criteria.dtc)

            # Ground-truth coverage by accepted same-class predictions.
            for i, g in enumerate(truth):
                n_gt[g.label] = n_gt.get(g.label, 0) + 1
                covered = math.fsum(
                    overlap[i][j]
                    for j, p in enumerate(predicted)
                    if p.label == g.label and accepted[j]
                )
                if covered / (g.offset - g.onset) >= criteria.gtc:
                    tp[g.label] = tp.get(g.label, 0) + 1

            # Rejected predictions: false positives and cross-triggers.
            for j, p in enumerate(predicted):
                if accepted[j]:
                    continue
                fp[p.label] = fp.get(p.label, 0) + 1
                for i, g in enumerate(truth):
                    if g.label == p.label:
                        continue
                    if overlap[i][j] / (g.offset - g.onset) >= criteria.cttc:
                        key = (p.label, g.label)
                        ct[key] = ct.get(key, 0) + 1

        labels = set(gt.vocabulary)
        for clip_set in (gt, predictions):
            labels |= {e.label for clip in clip_set.clips.values() for e in clip.events}
        return MatchCounts(
            classes=tuple(sorted(labels)), n_gt=n_gt, tp=tp, fp=fp, ct=ct
        ).normalized()


def oracle_match(
    predictions: ClipSet, gt: ClipSet, criteria: MatchCriteria
) -> MatchCounts:
    return BruteForceMatcher().match(predictions, gt, criteria)


def oracle_psds(
    gt: ClipSet, operating_points: Sequence[OperatingPoint], scenario: ScenarioConfig
) -> float:
    """PSDS by direct evaluation of the PSD-ROC on every segment between breakpoints."""
    hours = gt.total_duration / 3600.0
    spans: dict[str, list[float]] = {}
    for clip in gt.clips.values():
        for g in clip.events:
            spans.setdefault(g.label, []).append(g.offset - g.onset)
    gt_seconds = {label: math.fsum(s) for label, s in spans.items()}

    points: list[dict[str, tuple[float, float]]] = []
    scored: list[str] = []
    for op in operating_points:
        counts = oracle_match(op.predictions, gt, scenario.criteria)
        scored = [c for c in counts.classes if counts.n_gt.get(c, 0) > 0]
        per_class = {}
        for c in scored:
            others = [o for o in scored if o != c]
            cross = [
                counts.ct.get((c, o), 0) / (gt_seconds[o] / 3600.0) for o in others
            ]
            mean_cross = math.fsum(cross) / len(cross) if cross else 0.0
            efpr = counts.fp.get(c, 0) / hours + scenario.alpha_ct * mean_cross
            per_class[c] = (efpr, counts.tp.get(c, 0) / counts.n_gt[c])
        points.append(per_class)
    if not scored:
        return 0.0

    e_max = scenario.e_max
    edges = sorted({0.0, e_max} | {p[c][0] for p in points for c in scored if p[c][0] < e_max})
    area = []
    for start, end in zip(edges, edges[1:]):
        best = [
            max((p[c][1] for p in points if p[c][0] <= start), default=0.0)
            for c in scored
        ]
        r = statistics.fmean(best) - scenario.alpha_st * statistics.pstdev(best)
        area.append(max(r, 0.0) * (end - start))
    return min(1.0, math.fsum(area) / e_max)
