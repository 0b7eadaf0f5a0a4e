from collections import Counter
from collections.abc import Mapping
from io import StringIO

import numpy as np
import pandas as pd
from loguru import logger

from .exceptions import (
    DuplicateClip,
    GapInFrames,
    InvalidInterval,
    LineError,
    MalformedRow,
    MissingDuration,
    NonPositiveDuration,
    ScoreOutOfRange,
    VocabularyMismatch,
)
from .schemas.core import (
    DEFAULT_HOP,
    EPSILON_CLIP,
    Clip,
    ClipSet,
    Event,
    ParseIssue,
    PosteriorMatrix,
)
from .utils import format_float, iter_tsv_rows, parse_float

EVENT_HEADER = ("filename", "onset", "offset", "event_label")
DURATION_HEADER = ("filename", "duration")
POSTERIOR_HEADER = ("filename", "frame_index")


# -------------------------------------
# Event files (ground truth and predictions)
# -------------------------------------
def _parse_event_row(line: int, fields: list[str]) -> tuple[str, Event]:
    if len(fields) != len(EVENT_HEADER):
        raise MalformedRow(
            f"expected {len(EVENT_HEADER)} columns, found {len(fields)}", line=line
        )
    filename, onset_text, offset_text, label = fields
    if not filename:
        raise MalformedRow("empty filename", line=line)
    onset = parse_float(onset_text, "onset", line)
    offset = parse_float(offset_text, "offset", line)
    if onset < 0:
        raise InvalidInterval(f"onset {onset_text} is negative", line=line)
    if offset <= onset:
        raise InvalidInterval(
            f"offset {offset_text} is not after onset {onset_text}", line=line
        )
    if not label:
        raise MalformedRow("empty event_label", line=line)
    return filename, Event(onset=onset, offset=offset, label=label)


def parse_ground_truth(tsv_text: str, strict: bool = True) -> ClipSet:
    """Parse a ``filename onset offset event_label`` TSV into a ClipSet.

    Durations are unknown at this stage; use :func:`merge` to attach them.
    With ``strict=False`` bad rows are kept as ``ClipSet.issues`` instead of
    raising, so every data row ends up either as an event or as an issue.
    """
    events: dict[str, list[Event]] = {}
    issues: list[ParseIssue] = []
    for line, fields in iter_tsv_rows(tsv_text, EVENT_HEADER):
        try:
            filename, event = _parse_event_row(line, fields)
        except LineError as e:
            if strict:
                raise
            issues.append(ParseIssue(line=e.line, message=e.message))
            continue
        events.setdefault(filename, []).append(event)

    clips = {
        clip_id: Clip(id=clip_id, events=tuple(clip_events))
        for clip_id, clip_events in events.items()
    }
    labels = sorted({e.label for clip_events in events.values() for e in clip_events})
    logger.debug(
        f"parse_ground_truth: {sum(map(len, events.values()))} events in "
        f"{len(clips)} clips, {len(issues)} rejected rows"
    )
    return ClipSet(clips=clips, vocabulary=tuple(labels), issues=tuple(issues))


parse_predictions = parse_ground_truth


def parse_durations(tsv_text: str) -> dict[str, float]:
    durations: dict[str, float] = {}
    for line, fields in iter_tsv_rows(tsv_text, DURATION_HEADER):
        if len(fields) != len(DURATION_HEADER):
            raise MalformedRow(
                f"expected {len(DURATION_HEADER)} columns, found {len(fields)}",
                line=line,
            )
        filename, duration_text = fields
        duration = parse_float(duration_text, "duration", line)
        if duration <= 0:
            raise NonPositiveDuration(
                f"duration {duration_text} of {filename} is not positive", line=line
            )
        if filename in durations:
            raise DuplicateClip(f"duplicate clip {filename}", line=line)
        durations[filename] = duration
    return durations


def merge(
    gt_events: ClipSet,
    durations: Mapping[str, float],
    vocabulary: tuple[str, ...] | None = None,
) -> ClipSet:
    """Attach clip durations to an events-only ClipSet.

    Clips listed in ``durations`` without events become empty clips, so they
    still count towards ``total_duration``. Offsets past the clip end are
    clipped; events starting at or after the end are dropped. Both cases are
    recorded in ``ClipSet.warnings``.
    """
    missing = sorted(set(gt_events.clips) - set(durations))
    if missing:
        raise MissingDuration(
            f"no duration for {len(missing)} clip(s), first: {missing[0]}"
        )

    warnings = list(gt_events.warnings)
    clips: dict[str, Clip] = {}
    for clip_id, duration in durations.items():
        source = gt_events.clips.get(clip_id)
        kept: list[Event] = []
        for event in source.events if source else ():
            if event.offset <= duration + EPSILON_CLIP:
                kept.append(event)
            elif event.onset < duration:
                warnings.append(
                    f"{clip_id}: offset {format_float(event.offset)} clipped to "
                    f"duration {format_float(duration)}"
                )
                kept.append(event.model_copy(update={"offset": duration}))
            else:
                warnings.append(
                    f"{clip_id}: event at {format_float(event.onset)} starts after "
                    f"clip end {format_float(duration)}, dropped"
                )
        clips[clip_id] = Clip(id=clip_id, duration=duration, events=tuple(kept))

    for message in warnings[len(gt_events.warnings) :]:
        logger.warning(f"merge: {message}")
    if vocabulary is None:
        vocabulary = gt_events.vocabulary
    return ClipSet(
        clips=clips,
        vocabulary=tuple(sorted(set(vocabulary))),
        issues=gt_events.issues,
        warnings=tuple(warnings),
    )


# -------------------------------------
# Posteriors
# -------------------------------------
def parse_posteriors(
    tsv_text: str,
    hop: float = DEFAULT_HOP,
    vocabulary: tuple[str, ...] | None = None,
) -> list[PosteriorMatrix]:
    """Parse a long-form ``filename frame_index <class...>`` TSV.

    Columns are reordered to ``vocabulary`` when given (every vocabulary
    class must be present), otherwise to the sorted class columns.
    """
    try:
        frame = pd.read_csv(
            StringIO(tsv_text),
            sep="\t",
            dtype={"filename": str},
            keep_default_na=False,
        )
    except pd.errors.EmptyDataError:
        raise MalformedRow("empty posterior file", line=1) from None
    except pd.errors.ParserError as e:
        raise MalformedRow(f"unreadable posterior file: {e}") from e

    header = next(line for line in tsv_text.splitlines() if line.strip())
    duplicated = [name for name, n in Counter(header.rstrip("\r").split("\t")).items() if n > 1]
    if duplicated:
        raise MalformedRow(f"duplicate header columns {duplicated}", line=1)
    columns = list(frame.columns)
    if columns[:2] != list(POSTERIOR_HEADER):
        raise MalformedRow(
            f"expected header to start with {'<TAB>'.join(POSTERIOR_HEADER)!r}", line=1
        )
    file_classes = columns[2:]
    if vocabulary is None:
        classes = tuple(sorted(file_classes))
    else:
        absent = [label for label in vocabulary if label not in file_classes]
        if absent:
            raise VocabularyMismatch(f"posterior file lacks classes {absent}")
        classes = tuple(vocabulary)

    numeric = frame[["frame_index", *classes]].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise MalformedRow("non-numeric frame index or score", line=row + 2)
    scores = numeric[list(classes)].to_numpy(dtype=float)
    out_of_range = ((scores < 0) | (scores > 1)).any(axis=1)
    if out_of_range.any():
        row = int(np.flatnonzero(out_of_range)[0])
        raise ScoreOutOfRange("score outside [0, 1]", line=row + 2)

    frame_index = numeric["frame_index"].to_numpy()
    matrices = []
    groups = frame.groupby("filename", sort=False).indices
    for clip_id in pd.unique(frame["filename"]):
        rows = groups[clip_id]
        order = rows[np.argsort(frame_index[rows], kind="stable")]
        indices = frame_index[order]
        expected = np.arange(len(order))
        if not np.array_equal(indices, expected):
            first = int(np.flatnonzero(indices != expected)[0])
            raise GapInFrames(
                f"{clip_id}: frame indices are not contiguous from 0 "
                f"(expected {first}, found {indices[first]:g})",
                line=int(order[first]) + 2,
            )
        matrices.append(
            PosteriorMatrix(
                clip_id=str(clip_id), classes=classes, scores=scores[order], hop=hop
            )
        )
    logger.debug(f"parse_posteriors: {len(matrices)} clips, {len(classes)} classes")
    return matrices


# -------------------------------------
# Serialization
# -------------------------------------
def _to_tsv(frame: pd.DataFrame) -> str:
    return frame.to_csv(sep="\t", index=False, float_format="%.9g", lineterminator="\n")


def serialize_events(clipset: ClipSet) -> str:
    rows = [
        (clip_id, event.onset, event.offset, event.label)
        for clip_id, event in clipset.events()
    ]
    return _to_tsv(pd.DataFrame(rows, columns=list(EVENT_HEADER)))


def serialize_durations(clipset: ClipSet) -> str:
    rows = list(clipset.durations.items())
    return _to_tsv(pd.DataFrame(rows, columns=list(DURATION_HEADER)))


def serialize_posteriors(matrices: list[PosteriorMatrix]) -> str:
    if not matrices:
        return "\t".join(POSTERIOR_HEADER) + "\n"
    classes = matrices[0].classes
    frames = []
    for matrix in matrices:
        if matrix.classes != classes:
            raise VocabularyMismatch(
                f"{matrix.clip_id}: class order differs from {list(classes)}"
            )
        block = pd.DataFrame(matrix.scores, columns=list(classes))
        block.insert(0, "frame_index", np.arange(matrix.n_frames))
        block.insert(0, "filename", matrix.clip_id)
        frames.append(block)
    return _to_tsv(pd.concat(frames, ignore_index=True))
