"""
Parsing of source metadata: subtitle transcripts (SRT / WebVTT), step
annotation tables, and recording manifests.

All times are held as float seconds rounded to the millisecond.
"""

import csv
import io
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import (
    DuplicateRecordingId,
    EmptyTranscript,
    MalformedRow,
    MalformedTimestamp,
    ManifestError,
    MissingFile,
    UnknownErrorLabel,
)
from .validation import ValidationReport

logger = logging.getLogger(__name__)

ANNOTATION_HEADER = ["start_s", "end_s", "description", "error_label"]
MANIFEST_HEADER = [
    "recording_id",
    "task",
    "duration_s",
    "source_kind",
    "subtitle_path",
    "steps_path",
    "egocentric",
]


def _ms(value):
    return round(float(value), 3)


@dataclass(frozen=True)
class TimeSpan:
    start: float
    end: float

    def __post_init__(self):
        object.__setattr__(self, "start", _ms(self.start))
        object.__setattr__(self, "end", _ms(self.end))
        if self.start < 0:
            raise ValueError(f"span start must be non-negative, got {self.start}")
        if not self.start < self.end:
            raise ValueError(f"span start must precede end, got [{self.start}, {self.end}]")

    @property
    def length(self):
        return self.end - self.start

    def contains(self, other):
        return self.start <= other.start and other.end <= self.end

    def hull(self, other):
        return TimeSpan(min(self.start, other.start), max(self.end, other.end))

    def shifted(self, offset):
        return TimeSpan(self.start + offset, self.end + offset)

    def to_dict(self):
        return {"start_s": self.start, "end_s": self.end}

    @classmethod
    def from_dict(cls, d):
        return cls(d["start_s"], d["end_s"])


class ErrorLabel(str, Enum):
    NORMAL = "normal"
    OMISSION = "omission"
    ADDITION = "addition"
    MODIFICATION = "modification"
    SLIP = "slip"
    CORRECTION = "correction"


# Error kinds whose recordings are kept for error-mode dialogues.
KEPT_ERROR_LABELS = frozenset({ErrorLabel.MODIFICATION, ErrorLabel.CORRECTION})


class SourceKind(str, Enum):
    NARRATED = "narrated"
    ANNOTATED = "annotated"


@dataclass(frozen=True)
class SubtitleEntry:
    text: str
    span: TimeSpan
    index: int

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("subtitle text is empty")

    def to_dict(self):
        return {"index": self.index, "text": self.text, **self.span.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["text"], TimeSpan.from_dict(d), d["index"])


@dataclass(frozen=True)
class StepAnnotation:
    description: str
    span: TimeSpan
    error_label: Optional[ErrorLabel] = ErrorLabel.NORMAL

    def __post_init__(self):
        if not self.description.strip():
            raise ValueError("step description is empty")

    @property
    def label(self):
        return self.error_label or ErrorLabel.NORMAL

    def to_dict(self):
        return {
            "description": self.description,
            "error_label": self.label.value,
            **self.span.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["description"], TimeSpan.from_dict(d), ErrorLabel(d.get("error_label") or "normal"))


@dataclass
class SourceRecording:
    recording_id: str
    task: str
    duration: float
    source_kind: SourceKind
    subtitles: Optional[list] = None
    steps: Optional[list] = None
    frame_count: Optional[int] = None
    egocentric: bool = True

    def __post_init__(self):
        self.source_kind = SourceKind(self.source_kind)
        if self.source_kind is SourceKind.NARRATED and self.subtitles is None:
            raise ValueError(f"{self.recording_id}: narrated recording needs subtitles")
        if self.source_kind is SourceKind.ANNOTATED and self.steps is None:
            raise ValueError(f"{self.recording_id}: annotated recording needs step annotations")

    def error_labels(self):
        return {s.label for s in self.steps or ()}

    def to_dict(self):
        return {
            "recording_id": self.recording_id,
            "task": self.task,
            "duration_s": self.duration,
            "source_kind": self.source_kind.value,
            "frame_count": self.frame_count,
            "egocentric": self.egocentric,
            "subtitles": None if self.subtitles is None else [s.to_dict() for s in self.subtitles],
            "steps": None if self.steps is None else [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d):
        subs = d.get("subtitles")
        steps = d.get("steps")
        return cls(
            recording_id=d["recording_id"],
            task=d["task"],
            duration=d["duration_s"],
            source_kind=SourceKind(d["source_kind"]),
            subtitles=None if subs is None else [SubtitleEntry.from_dict(s) for s in subs],
            steps=None if steps is None else [StepAnnotation.from_dict(s) for s in steps],
            frame_count=d.get("frame_count"),
            egocentric=d.get("egocentric", True),
        )


# ---------------------------------------------------------------------------
# Subtitles
# ---------------------------------------------------------------------------

_TIME_RE = re.compile(r"^(?:(\d+):)?(\d{1,2}):(\d{1,2})(?:[,.](\d{1,3}))?$")
_TAG_RE = re.compile(r"<[^>]*>|\{\\[^}]*\}")
_WS_RE = re.compile(r"\s+")


def parse_timestamp(text, line=None):
    """Parse ``HH:MM:SS,mmm`` / ``MM:SS.mmm`` into seconds."""
    m = _TIME_RE.match(text.strip())
    if not m:
        raise MalformedTimestamp(f"unparseable time code {text.strip()!r}", line)
    hours, minutes, seconds, frac = m.groups()
    if int(minutes) > 59 or int(seconds) > 59:
        raise MalformedTimestamp(f"out-of-range time code {text.strip()!r}", line)
    millis = int(frac.ljust(3, "0")) if frac else 0
    return int(hours or 0) * 3600 + int(minutes) * 60 + int(seconds) + millis / 1000.0


def format_timestamp(seconds, fmt="srt"):
    total_ms = int(round(seconds * 1000))
    hours, rest = divmod(total_ms, 3_600_000)
    minutes, rest = divmod(rest, 60_000)
    secs, millis = divmod(rest, 1000)
    sep = "," if fmt == "srt" else "."
    return f"{hours:02d}:{minutes:02d}:{secs:02d}{sep}{millis:03d}"


def _clean_cue_text(lines):
    text = " ".join(line.strip() for line in lines)
    text = _TAG_RE.sub("", text)
    return _WS_RE.sub(" ", text).strip()


def _blocks(lines):
    """Yield (first_line_number, [lines]) for blank-line separated blocks."""
    block, start = [], None
    for lineno, line in enumerate(lines, start=1):
        if line.strip():
            if start is None:
                start = lineno
            block.append((lineno, line))
        elif block:
            yield start, block
            block, start = [], None
    if block:
        yield start, block


def parse_subtitle_file(content: bytes, format: str) -> list:
    """Parse SRT or WebVTT bytes into sorted, renumbered subtitle entries."""
    fmt = format.lower().lstrip(".")
    if fmt not in ("srt", "vtt"):
        raise ValueError(f"unsupported subtitle format {format!r}")
    text = content.decode("utf-8-sig") if isinstance(content, bytes) else content.lstrip("﻿")
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")

    cues = []
    for block_no, (start_line, block) in enumerate(_blocks(lines)):
        first = block[0][1].strip()
        if fmt == "vtt":
            if block_no == 0 and first.startswith("WEBVTT"):
                continue
            if first.split(" ")[0] in ("NOTE", "STYLE", "REGION"):
                continue
        arrow = next((i for i, (_, line) in enumerate(block) if "-->" in line), None)
        if arrow is None:
            raise MalformedTimestamp("cue without a time code line", start_line)
        lineno, timing = block[arrow]
        left, _, right = timing.partition("-->")
        # vtt cue settings follow the end time
        right = right.strip().split(" ")[0] if right.strip() else ""
        begin = parse_timestamp(left, lineno)
        end = parse_timestamp(right, lineno)
        if not end > begin:
            raise MalformedTimestamp(f"cue ends at {end} before it starts at {begin}", lineno)
        cue_text = _clean_cue_text(line for _, line in block[arrow + 1 :])
        if not cue_text:
            logger.debug("skipping empty cue at line %d", lineno)
            continue
        cues.append((begin, end, cue_text))

    if not cues:
        raise EmptyTranscript("transcript contains no cues")
    cues.sort(key=lambda c: c[0])
    return [SubtitleEntry(t, TimeSpan(b, e), i) for i, (b, e, t) in enumerate(cues, start=1)]


def format_subtitles(entries, format="srt") -> bytes:
    """Serialize entries back to SRT or WebVTT bytes."""
    fmt = format.lower().lstrip(".")
    out = ["WEBVTT", ""] if fmt == "vtt" else []
    for e in entries:
        out.append(str(e.index))
        out.append(f"{format_timestamp(e.span.start, fmt)} --> {format_timestamp(e.span.end, fmt)}")
        out.append(e.text)
        out.append("")
    return "\n".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# Step annotations
# ---------------------------------------------------------------------------


def parse_error_label(value, row=None):
    value = (value or "").strip().lower()
    if not value:
        return ErrorLabel.NORMAL
    try:
        return ErrorLabel(value)
    except ValueError:
        raise UnknownErrorLabel(f"unknown error label {value!r}", row) from None


def parse_step_annotation_file(content: bytes) -> list:
    """Parse a ``start_s,end_s,description,error_label`` table.

    The header row is optional; the error label column may be omitted or
    left empty, both of which mean ``normal``.
    """
    text = content.decode("utf-8-sig") if isinstance(content, bytes) else content.lstrip("﻿")
    reader = csv.reader(io.StringIO(text), skipinitialspace=True)
    rows = []
    for rowno, row in enumerate(reader, start=1):
        row = [c.strip() for c in row]
        if not any(row):
            continue
        if rowno == 1 and row[0].lower() == "start_s":
            if row[:3] != ANNOTATION_HEADER[:3]:
                raise MalformedRow(f"unexpected header {row}", rowno)
            continue
        if len(row) not in (3, 4):
            raise MalformedRow(f"expected 3 or 4 columns, got {len(row)}", rowno)
        try:
            start, end = float(row[0]), float(row[1])
        except ValueError:
            raise MalformedRow(f"non-numeric time in {row[:2]}", rowno) from None
        label = parse_error_label(row[3] if len(row) == 4 else "", rowno)
        try:
            rows.append(StepAnnotation(row[2], TimeSpan(start, end), label))
        except ValueError as exc:
            raise MalformedRow(str(exc), rowno) from None
    rows.sort(key=lambda s: s.span.start)
    return rows


def format_step_annotations(steps) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANNOTATION_HEADER)
    for s in steps:
        writer.writerow([f"{s.span.start:.3f}", f"{s.span.end:.3f}", s.description, s.label.value])
    return buf.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def _parse_bool(value):
    return (value or "").strip().lower() not in ("0", "false", "no", "n", "")


def _read_referenced(base, rel):
    path = (base / rel) if not Path(rel).is_absolute() else Path(rel)
    if not path.is_file():
        raise MissingFile(path)
    return path, path.read_bytes()


def _load_row(base, row, rowno):
    rid = row["recording_id"]
    try:
        kind = SourceKind(row["source_kind"].strip().lower())
        duration = float(row["duration_s"])
    except (ValueError, AttributeError) as exc:
        raise ManifestError(f"manifest row {rowno} ({rid}): {exc}") from None
    subtitles = steps = None
    if row.get("subtitle_path"):
        path, data = _read_referenced(base, row["subtitle_path"])
        subtitles = parse_subtitle_file(data, path.suffix.lstrip(".") or "srt")
    if row.get("steps_path"):
        _, data = _read_referenced(base, row["steps_path"])
        steps = parse_step_annotation_file(data)
    frame_count = row.get("frame_count")
    try:
        return SourceRecording(
            recording_id=rid,
            task=row["task"].strip(),
            duration=duration,
            source_kind=kind,
            subtitles=subtitles,
            steps=steps,
            frame_count=int(frame_count) if frame_count else None,
            egocentric=_parse_bool(row.get("egocentric", "true")),
        )
    except ValueError as exc:
        raise ManifestError(f"manifest row {rowno}: {exc}") from None


def load_manifest(path, jobs=1) -> list:
    """Load every recording named in a manifest CSV, in manifest order.

    Referenced subtitle/annotation paths are resolved relative to the
    manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    reader = csv.DictReader(io.StringIO(path.read_text(encoding="utf-8-sig")))
    missing = [c for c in MANIFEST_HEADER if c not in (reader.fieldnames or [])]
    if missing:
        raise ManifestError(f"{path}: manifest lacks columns {missing}")
    rows = [{k: (v or "").strip() for k, v in r.items() if k} for r in reader]

    seen = set()
    for r in rows:
        if r["recording_id"] in seen:
            raise DuplicateRecordingId(f"recording_id {r['recording_id']!r} appears more than once")
        seen.add(r["recording_id"])

    base = path.parent
    work = [(base, r, i) for i, r in enumerate(rows, start=2)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda a: _load_row(*a), work))
    return [_load_row(*a) for a in work]


# ---------------------------------------------------------------------------
# Checks and selection
# ---------------------------------------------------------------------------


def _check_spans(report, what, spans, duration, allow_overlap=True):
    prev = None
    for i, span in enumerate(spans, start=1):
        if span.end > duration + 1e-9:
            report.add("span exceeds duration", f"{what} {i} ends at {span.end} s beyond duration {duration} s")
        if prev is not None and span.start < prev.start:
            report.add("non-monotone ordering", f"{what} {i} starts at {span.start} s before {what} {i - 1}")
        prev = span
    for i, a in enumerate(spans, start=1):
        for j, b in enumerate(spans, start=1):
            if i < j and (a.contains(b) or b.contains(a)):
                outer, inner = (i, j) if a.contains(b) else (j, i)
                report.add("nested spans", f"{what} {outer} {_fmt(spans[outer - 1])} contains {what} {inner} {_fmt(spans[inner - 1])}")


def _fmt(span):
    return f"[{span.start:g}, {span.end:g}]"


def validate_timeline(recording: SourceRecording) -> ValidationReport:
    """Report spans past the recording end, nested spans and ordering breaks."""
    report = ValidationReport()
    if recording.subtitles:
        _check_spans(report, "subtitle", [s.span for s in recording.subtitles], recording.duration)
    if recording.steps:
        _check_spans(report, "step", [s.span for s in recording.steps], recording.duration)
    return report


def _pool(recording):
    labels = recording.error_labels() - {ErrorLabel.NORMAL}
    if not labels:
        return "normal"
    if labels <= KEPT_ERROR_LABELS:
        return "error"
    return "excluded"


def partition_recordings(recordings):
    """Split recordings into (error, normal, excluded) pools, order preserved.

    Recordings without step annotations carry no error labels and land in
    the normal pool.
    """
    pools = {"error": [], "normal": [], "excluded": []}
    for r in recordings:
        pools[_pool(r)].append(r)
    return pools["error"], pools["normal"], pools["excluded"]


def select_error_recordings(recordings) -> list:
    """Recordings whose only mistakes are step modifications and corrections."""
    return partition_recordings(recordings)[0]


def filter_egocentric(recordings):
    kept = [r for r in recordings if r.egocentric]
    if len(kept) < len(recordings):
        logger.info("dropped %d non-egocentric recordings", len(recordings) - len(kept))
    return kept

