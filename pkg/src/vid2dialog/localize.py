"""
Temporal localization of instruction steps, clip cut-lists, and scoring
of predicted step segmentations against ground truth.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .errors import DanglingSourceRef, EmptyTruth, MissingSpan, NoLocalizableSteps
from .ingest import TimeSpan

logger = logging.getLogger(__name__)

CUTLIST_HEADER = ["recording_id", "start_s", "end_s", "clip_filename"]
SPANS_HEADER = ["recording_id", "step_ordinal", "start_s", "end_s"]
DEFAULT_RESOLUTION = 1.0


@dataclass
class StepSpanMap:
    recording_id: str
    entries: dict = field(default_factory=dict)

    def __getitem__(self, ordinal):
        return self.entries[ordinal]

    def __contains__(self, ordinal):
        return ordinal in self.entries

    def __len__(self):
        return len(self.entries)

    def ordinals(self):
        return sorted(self.entries)

    def get(self, ordinal, default=None):
        return self.entries.get(ordinal, default)

    def shifted(self, offset):
        return StepSpanMap(self.recording_id, {k: v.shifted(offset) for k, v in self.entries.items()})

    def problems(self, duration=None):
        """Ordering and range issues; empty when the map is well formed."""
        issues = []
        prev = None
        for k in self.ordinals():
            span = self.entries[k]
            if prev is not None and span.start < prev.start:
                issues.append(f"step {k} starts before step {k - 1}")
            if duration is not None and span.end > duration + 1e-9:
                issues.append(f"step {k} ends after the recording")
            prev = span
        return issues


def _hull(spans):
    return TimeSpan(min(s.start for s in spans), max(s.end for s in spans))


def localize_direct(iset, annotations):
    """Span of each step = hull of the annotations it was built from."""
    if iset.provenance.value not in ("annotation_merge", "annotation_cluster"):
        raise ValueError(f"direct localization needs an annotation-derived set, got {iset.provenance.value}")
    entries = {}
    for step in iset.steps:
        if not step.source_refs:
            raise DanglingSourceRef(f"step {step.ordinal} has no source annotations")
        spans = []
        for ref in step.source_refs:
            if not 1 <= ref <= len(annotations):
                raise DanglingSourceRef(f"step {step.ordinal} refers to annotation {ref} of {len(annotations)}")
            spans.append(annotations[ref - 1].span)
        entries[step.ordinal] = _hull(spans)
    return StepSpanMap(iset.recording_id, entries)


def localize_from_subtitles(iset, subtitles, duration=None):
    """Span of each step = first to last cited cue.

    Steps that cite no cue share out the gap between their localized
    neighbours evenly.
    """
    if iset.provenance.value != "narration_llm":
        raise ValueError(f"subtitle localization needs a narration-derived set, got {iset.provenance.value}")
    cues = {s.index: s for s in subtitles}
    known = {}
    for step in iset.steps:
        if not step.source_refs:
            continue
        missing = [r for r in step.source_refs if r not in cues]
        if missing:
            raise DanglingSourceRef(f"step {step.ordinal} refers to unknown cue(s) {missing}")
        known[step.ordinal] = _hull([cues[r].span for r in step.source_refs])
    if not known:
        raise NoLocalizableSteps(f"{iset.recording_id}: no step cites a subtitle cue")

    if duration is None:
        duration = max(s.span.end for s in subtitles)
    entries = dict(known)
    n = len(iset.steps)
    k = 1
    while k <= n:
        if k in known:
            k += 1
            continue
        run_end = k
        while run_end + 1 <= n and run_end + 1 not in known:
            run_end += 1
        prev = known.get(k - 1)
        nxt = known.get(run_end + 1)
        lo = prev.end if prev else 0.0
        hi = nxt.start if nxt else duration
        count = run_end - k + 1
        if hi - lo >= 0.001 * count:
            width = (hi - lo) / count
            for j in range(count):
                entries[k + j] = TimeSpan(lo + j * width, lo + (j + 1) * width)
        else:
            # no room between neighbours; borrow the nearest neighbour's span
            fallback = prev or nxt
            for j in range(count):
                entries[k + j] = fallback
        logger.info("%s: steps %d-%d cite no cue; gap-filled", iset.recording_id, k, run_end)
        k = run_end + 1
    return StepSpanMap(iset.recording_id, entries)


def attach_clips(conv, span_map):
    """Copy step spans onto the conversation's turns."""
    from .dialogue import TurnKind

    step_ordinals = [t.step_ordinal for t in conv.turns if t.kind is TurnKind.STEP]
    for k in step_ordinals:
        if k not in span_map:
            raise MissingSpan(k)
    first_start = min(span_map[k].start for k in step_ordinals) if step_ordinals else 0.0

    turns = []
    for t in conv.turns:
        span = None
        if t.kind is TurnKind.TASK_INIT:
            span = TimeSpan(0.0, first_start) if first_start > 0 else None
        elif t.kind is not TurnKind.CLOSING and t.step_ordinal is not None:
            if t.step_ordinal not in span_map:
                raise MissingSpan(t.step_ordinal)
            span = span_map[t.step_ordinal]
        turns.append(replace(t, span=span))
    return replace(conv, turns=turns)


def clip_filename(session_id, turn_index):
    return f"{session_id}_t{turn_index:03d}.mp4"


def cutlist_rows(sessions):
    rows = []
    for s in sessions:
        for t in s.conversation.turns:
            if t.span is not None:
                rows.append(
                    [s.source_recording_id, f"{t.span.start:.3f}", f"{t.span.end:.3f}", clip_filename(s.session_id, t.index)]
                )
    return rows


def emit_cutlist(sessions, output_dir, filename="cutlist.csv"):
    """Write ``recording_id,start_s,end_s,clip_filename`` rows for an external clipper."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CUTLIST_HEADER)
    writer.writerows(cutlist_rows(sessions))
    return atomic_write_text(Path(output_dir) / filename, buf.getvalue())


def write_span_maps(span_maps, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SPANS_HEADER)
    for m in span_maps:
        for k in m.ordinals():
            writer.writerow([m.recording_id, k, f"{m[k].start:.3f}", f"{m[k].end:.3f}"])
    return atomic_write_text(path, buf.getvalue())


def read_span_maps(path):
    maps = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            m = maps.setdefault(row["recording_id"], StepSpanMap(row["recording_id"]))
            m.entries[int(row["step_ordinal"])] = TimeSpan(float(row["start_s"]), float(row["end_s"]))
    return maps


# ---------------------------------------------------------------------------
# Segmentation scoring
# ---------------------------------------------------------------------------


@dataclass
class SegmentationScore:
    mean_iou: float
    precision: float
    accuracy: float
    per_step_iou: dict
    precision_defined: bool = True

    def as_tuple(self):
        return (self.mean_iou, self.precision, self.accuracy)


def label_timeline(span_map, duration, resolution=DEFAULT_RESOLUTION):
    """Per-cell step labels (0 = background); a cell takes the label covering its centre.

    When spans overlap the later ordinal wins.
    """
    n_cells = max(1, math.ceil(duration / resolution - 1e-9))
    centres = (np.arange(n_cells) + 0.5) * resolution
    labels = np.zeros(n_cells, dtype=np.int64)
    for k in span_map.ordinals():
        span = span_map[k]
        labels[(centres >= span.start) & (centres < span.end)] = k
    return labels


def score_segmentation(predicted, truth, duration, resolution=DEFAULT_RESOLUTION):
    """Cell-wise IoU (macro over truth steps), precision and accuracy."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    gt = label_timeline(truth, duration, resolution)
    pr = label_timeline(predicted, duration, resolution)
    steps = [k for k in truth.ordinals() if np.any(gt == k)]
    if not steps:
        raise EmptyTruth("ground truth labels no cell with a step")

    per_step = {}
    for k in steps:
        inter = np.count_nonzero((gt == k) & (pr == k))
        union = np.count_nonzero((gt == k) | (pr == k))
        per_step[k] = inter / union
    predicted_cells = np.count_nonzero(pr != 0)
    correct = pr == gt
    if predicted_cells:
        precision = np.count_nonzero(correct & (pr != 0)) / predicted_cells
    else:
        precision = 0.0
    return SegmentationScore(
        mean_iou=float(np.mean([per_step[k] for k in steps])),
        precision=float(precision),
        accuracy=float(np.count_nonzero(correct) / gt.size),
        per_step_iou={k: float(v) for k, v in per_step.items()},
        precision_defined=bool(predicted_cells),
    )
