from collections.abc import Mapping, Sequence

import numpy as np
from loguru import logger
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import InputError, MissingDuration, VocabularyMismatch
from .schemas.core import Clip, ClipSet, Event, PosteriorMatrix
from .schemas.scoring import DecoderConfig, OperatingPoint


def median_filter(binary_sequence: Sequence[int] | np.ndarray, window: int) -> np.ndarray:
    """Median filter a 0/1 sequence, truncating the window at both edges.

    Near the edges the median is taken over the frames that exist; an even
    split there (median 0.5) counts as active.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"median_filter: window {window} must be odd and >= 1")
    sequence = np.asarray(binary_sequence, dtype=float)
    if sequence.size == 0 or window == 1:
        return sequence.astype(int)
    half = window // 2
    padded = np.pad(sequence, half, constant_values=np.nan)
    medians = np.nanmedian(sliding_window_view(padded, window), axis=1)
    return (medians >= 0.5).astype(int)


def binarize_and_merge(
    posterior_column: Sequence[float] | np.ndarray,
    threshold: float,
    hop: float,
    label: str,
    window: int = 1,
    duration: float | None = None,
) -> list[Event]:
    """Turn one class column into events at one threshold.

    A frame is active when its score is >= ``threshold``; the active mask is
    median filtered and each maximal run of frames ``i..j`` becomes
    ``[i * hop, (j + 1) * hop)``, with the offset clipped to ``duration``.
    """
    active = (np.asarray(posterior_column, dtype=float) >= threshold).astype(int)
    if window > 1:
        active = median_filter(active, window)
    edges = np.diff(np.concatenate(([0], active, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)

    events = []
    for start, end in zip(starts, ends):
        onset = float(start) * hop
        offset = float(end) * hop
        if duration is not None:
            offset = min(offset, duration)
        if offset > onset:
            events.append(Event(onset=onset, offset=offset, label=label))
    return events


def _clip_duration(matrix: PosteriorMatrix, durations: Mapping[str, float] | None) -> float:
    if durations is None:
        return matrix.n_frames * matrix.hop
    if matrix.clip_id not in durations:
        raise MissingDuration(f"decode: no duration for clip {matrix.clip_id}")
    duration = durations[matrix.clip_id]
    if matrix.n_frames * matrix.hop > duration + matrix.hop:
        raise InputError(
            f"decode: {matrix.clip_id} has {matrix.n_frames} frames of "
            f"{matrix.hop} s, longer than its {duration} s duration"
        )
    return duration


def decode(
    posteriors: Sequence[PosteriorMatrix],
    config: DecoderConfig | None = None,
    durations: Mapping[str, float] | None = None,
    vocabulary: tuple[str, ...] | None = None,
) -> list[OperatingPoint]:
    """Decode posteriors into one operating point per threshold.

    Without ``durations`` a clip lasts ``n_frames * hop``. With them, clips
    that have no posteriors still appear as empty clips.
    """
    config = config or DecoderConfig()
    if vocabulary is None:
        vocabulary = tuple(sorted({c for m in posteriors for c in m.classes}))
    for matrix in posteriors:
        unknown = set(matrix.classes) - set(vocabulary)
        if unknown:
            raise VocabularyMismatch(
                f"decode: {matrix.clip_id} has classes {sorted(unknown)} "
                "outside the vocabulary"
            )
    clip_durations = {m.clip_id: _clip_duration(m, durations) for m in posteriors}
    all_durations = dict(durations or {})
    all_durations.update(clip_durations)

    operating_points = []
    for threshold in config.thresholds:
        decoded: dict[str, list[Event]] = {}
        for matrix in posteriors:
            events = decoded.setdefault(matrix.clip_id, [])
            for label in matrix.classes:
                events.extend(
                    binarize_and_merge(
                        matrix.column(label),
                        threshold,
                        matrix.hop,
                        label,
                        window=config.window_for(label),
                        duration=clip_durations[matrix.clip_id],
                    )
                )
        clips = {
            clip_id: Clip(
                id=clip_id,
                duration=duration,
                events=tuple(sorted(decoded.get(clip_id, []), key=_event_key)),
            )
            for clip_id, duration in sorted(all_durations.items())
        }
        operating_points.append(
            OperatingPoint(
                threshold=threshold,
                predictions=ClipSet(clips=clips, vocabulary=tuple(sorted(vocabulary))),
                name=f"pred_th{threshold:.2f}",
            )
        )
    logger.info(
        f"decode: {len(posteriors)} clips decoded at {len(operating_points)} thresholds"
    )
    return operating_points


def _event_key(event: Event) -> tuple[float, float, str]:
    return event.onset, event.offset, event.label
