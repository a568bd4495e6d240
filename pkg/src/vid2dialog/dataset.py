"""
Sessions: assembly, stratified splitting, corpus statistics and the
JSON Lines dataset format.
"""

import csv
import hashlib
import io
import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import jsonschema

from ._io import atomic_write_text, jsonl_lines
from .dialogue import ActionType, Conversation, SpeechStyle, validate, word_count
from .errors import EmptyCorpus, IOFailure, SchemaViolation, ValidationFailure
from .instruction import InstructionSet
from .localize import clip_filename

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
DEFAULT_RATIOS = (0.7, 0.1, 0.2)
CLIP_DIR = "clips"


@dataclass
class Session:
    session_id: str
    task: str
    style: SpeechStyle
    action_type: ActionType
    instruction_set: InstructionSet
    conversation: Conversation
    source_recording_id: str
    split: Optional[str] = None

    def __post_init__(self):
        self.style = SpeechStyle(self.style)
        self.action_type = ActionType(self.action_type)
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    @property
    def category(self):
        return f"{self.style.value}-{self.action_type.value}"

    @property
    def stratum(self):
        return (self.task, self.style.value, self.action_type.value)


def session_id_for(recording_id, style, action_type):
    key = f"{recording_id}\x1f{SpeechStyle(style).value}\x1f{ActionType(action_type).value}"
    return "s" + hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def assemble(conv, iset, *, recording_id=None, split=None):
    """Bind a validated conversation and its instructions into a session."""
    report = validate(conv, iset)
    if not report.ok:
        raise ValidationFailure(report)
    recording_id = recording_id or conv.source_recording_id or iset.recording_id
    sid = session_id_for(recording_id, conv.style, conv.action_type)
    turns = [
        replace(t, clip_path=f"{CLIP_DIR}/{clip_filename(sid, t.index)}" if t.span is not None else None)
        for t in conv.turns
    ]
    conv = replace(conv, turns=turns, source_recording_id=recording_id)
    return Session(sid, conv.task, conv.style, conv.action_type, iset, conv, recording_id, split)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


@dataclass
class SplitAssignment:
    assignment: dict
    seed: int
    ratios: tuple

    def counts(self):
        out = {s: 0 for s in SPLITS}
        for v in self.assignment.values():
            out[v] += 1
        return out

    def apply(self, sessions):
        return [replace(s, split=self.assignment[s.session_id]) for s in sessions]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["session_id", "split"])
        for sid in sorted(self.assignment):
            writer.writerow([sid, self.assignment[sid]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, seed=None, ratios=DEFAULT_RATIOS):
        rows = csv.DictReader(io.StringIO(text))
        return cls({r["session_id"]: r["split"] for r in rows}, seed, tuple(ratios))


def _fractions(ratios):
    fr = [Fraction(r).limit_denominator(10**6) if not isinstance(r, Fraction) else r for r in ratios]
    if len(fr) != 3 or any(f < 0 for f in fr):
        raise ValueError(f"need three non-negative ratios, got {ratios}")
    if abs(sum(float(r) for r in ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    return fr


def split_sizes(n, ratios=DEFAULT_RATIOS):
    """Largest-remainder sizes for one stratum of ``n`` sessions.

    Ties in the remainder go to the earlier split (train, val, test).
    Any stratum of 3 or more sessions gets at least one test session.
    """
    fr = _fractions(ratios)
    quotas = [n * f for f in fr]
    sizes = [int(q) for q in quotas]
    order = sorted(range(3), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    if n >= 3 and sizes[2] == 0:
        donor = max(range(2), key=lambda i: sizes[i])
        sizes[donor] -= 1
        sizes[2] += 1
    return sizes


def stratified_split(sessions, ratios=DEFAULT_RATIOS, seed=0):
    """Seeded per-(task, style, action type) split."""
    if not sessions:
        raise EmptyCorpus("cannot split an empty corpus")
    _fractions(ratios)
    strata = defaultdict(list)
    for s in sessions:
        strata[s.stratum].append(s.session_id)
    assignment = {}
    for key in sorted(strata):
        ids = sorted(strata[key])
        random.Random(f"{seed}|{'|'.join(key)}").shuffle(ids)
        train, val, _ = split_sizes(len(ids), ratios)
        for pos, sid in enumerate(ids):
            assignment[sid] = "train" if pos < train else "val" if pos < train + val else "test"
    return SplitAssignment(assignment, seed, tuple(ratios))


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def _mean(xs):
    return math.fsum(xs) / len(xs) if xs else 0.0


@dataclass
class StatsReport:
    per_task: dict = field(default_factory=dict)
    n_sessions: int = 0
    n_turns: int = 0
    video_seconds: float = 0.0
    user_words: dict = field(default_factory=dict)
    expert_words: list = field(default_factory=list)
    clip_lengths: list = field(default_factory=list)

    @property
    def mean_turns(self):
        return self.n_turns / self.n_sessions if self.n_sessions else 0.0

    def mean_user_words(self, category):
        return _mean(self.user_words.get(category, []))

    @property
    def mean_expert_words(self):
        return _mean(self.expert_words)

    @property
    def mean_clip_length(self):
        return _mean(self.clip_lengths)

    def summary(self):
        return {
            "sessions": self.n_sessions,
            "turns": self.n_turns,
            "video_seconds": round(self.video_seconds, 3),
            "mean_turns": round(self.mean_turns, 6),
            "mean_expert_words": round(self.mean_expert_words, 6),
            "mean_clip_seconds": round(self.mean_clip_length, 6),
            **{f"mean_user_words[{c}]": round(self.mean_user_words(c), 6) for c in sorted(self.user_words)},
        }


def compute_stats(sessions):
    """Corpus counts and word/clip-length distributions (all sorted, so order-free)."""
    report = StatsReport()
    per_task = defaultdict(lambda: {"sessions": 0, "turns": 0, "video_seconds": []})
    user_words = defaultdict(list)
    for s in sessions:
        row = per_task[s.task]
        row["sessions"] += 1
        row["turns"] += len(s.conversation.turns)
        for t in s.conversation.turns:
            user_words[s.category].append(word_count(t.user_text))
            report.expert_words.append(word_count(t.expert_text))
            if t.span is not None:
                report.clip_lengths.append(t.span.length)
                row["video_seconds"].append(t.span.length)
    # fsum keeps totals independent of session order
    report.per_task = {k: {**per_task[k], "video_seconds": math.fsum(per_task[k]["video_seconds"])} for k in sorted(per_task)}
    report.n_sessions = sum(r["sessions"] for r in report.per_task.values())
    report.n_turns = sum(r["turns"] for r in report.per_task.values())
    report.video_seconds = math.fsum(report.clip_lengths)
    report.user_words = {k: sorted(v) for k, v in sorted(user_words.items())}
    report.expert_words.sort()
    report.clip_lengths.sort()
    return report


def write_stats_report(report, out_dir):
    """CSV tables plus SVG histograms under ``out_dir``."""
    from .plots import histogram_svg

    out_dir = Path(out_dir)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task", "sessions", "turns", "video_seconds", "mean_turns"])
    for task, row in report.per_task.items():
        w.writerow([task, row["sessions"], row["turns"], f"{row['video_seconds']:.3f}", f"{row['turns'] / row['sessions']:.4f}"])
    atomic_write_text(out_dir / "per_task.csv", buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for k, v in report.summary().items():
        w.writerow([k, v])
    atomic_write_text(out_dir / "summary.csv", buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["category", "turns", "mean_user_words"])
    for cat, xs in report.user_words.items():
        w.writerow([cat, len(xs), f"{_mean(xs):.4f}"])
    atomic_write_text(out_dir / "user_words.csv", buf.getvalue())

    atomic_write_text(
        out_dir / "user_turn_words.svg",
        histogram_svg(report.user_words, "words per user turn", "user turn length by category"),
    )
    atomic_write_text(
        out_dir / "expert_turn_words.svg",
        histogram_svg({"expert": report.expert_words}, "words per expert turn", "expert turn length"),
    )
    atomic_write_text(
        out_dir / "clip_seconds.svg",
        histogram_svg({"clips": report.clip_lengths}, "clip length (s)", "user-turn clip length"),
    )
    return out_dir


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_SPAN = {
    "anyOf": [
        {"type": "null"},
        {
            "type": "object",
            "required": ["start_s", "end_s"],
            "properties": {"start_s": {"type": "number", "minimum": 0}, "end_s": {"type": "number"}},
        },
    ]
}

SESSION_SCHEMA = {
    "type": "object",
    "required": [
        "schema_version",
        "session_id",
        "task",
        "style",
        "action_type",
        "split",
        "source_recording_id",
        "provenance",
        "instructions",
        "turns",
    ],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "session_id": {"type": "string", "minLength": 1},
        "task": {"type": "string"},
        "style": {"enum": [s.value for s in SpeechStyle]},
        "action_type": {"enum": [a.value for a in ActionType]},
        "split": {"enum": [None, *SPLITS]},
        "source_recording_id": {"type": "string"},
        "provenance": {"enum": ["narration_llm", "annotation_merge", "annotation_cluster"]},
        "instructions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["ordinal", "text", "is_correction", "span"],
                "properties": {
                    "ordinal": {"type": "integer", "minimum": 1},
                    "text": {"type": "string", "minLength": 1},
                    "is_correction": {"type": "boolean"},
                    "span": _SPAN,
                    "source_refs": {"type": "array", "items": {"type": "integer"}},
                    "caveats": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "turns": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["index", "kind", "step_ordinal", "user_text", "expert_text", "span", "clip_path"],
                "properties": {
                    "index": {"type": "integer", "minimum": 1},
                    "kind": {"enum": ["task_init", "step", "clarification", "error_report", "closing"]},
                    "step_ordinal": {"type": ["integer", "null"]},
                    "user_text": {"type": "string"},
                    "expert_text": {"type": "string"},
                    "span": _SPAN,
                    "clip_path": {"type": ["string", "null"]},
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SESSION_SCHEMA)


def session_to_dict(s):
    return {
        "schema_version": SCHEMA_VERSION,
        "session_id": s.session_id,
        "task": s.task,
        "style": s.style.value,
        "action_type": s.action_type.value,
        "split": s.split,
        "source_recording_id": s.source_recording_id,
        "provenance": s.instruction_set.provenance.value,
        "instructions": [st.to_dict() for st in s.instruction_set.steps],
        "turns": [t.to_dict() for t in s.conversation.turns],
    }


def session_from_dict(d, line=None, root=None):
    errors = sorted(_VALIDATOR.iter_errors(d), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "required":
            missing = err.message.split("'")[1] if "'" in err.message else ""
            path = f"{path}.{missing}" if path else missing
        raise SchemaViolation(err.message, line, path)
    iset = InstructionSet.from_dict(
        {
            "task": d["task"],
            "recording_id": d["source_recording_id"],
            "provenance": d["provenance"],
            "steps": d["instructions"],
        }
    )
    conv = Conversation.from_dict(
        {
            "task": d["task"],
            "style": d["style"],
            "action_type": d["action_type"],
            "source_recording_id": d["source_recording_id"],
            "turns": d["turns"],
        }
    )
    if root is not None:
        conv = replace(
            conv,
            turns=[replace(t, clip_path=str(Path(root) / t.clip_path) if t.clip_path else None) for t in conv.turns],
        )
    return Session(d["session_id"], d["task"], d["style"], d["action_type"], iset, conv, d["source_recording_id"], d["split"])


def dumps_dataset(sessions):
    return "".join(json.dumps(session_to_dict(s), ensure_ascii=False, sort_keys=True) + "\n" for s in sessions)


def write_dataset(sessions, path):
    return atomic_write_text(path, dumps_dataset(sessions))


def read_dataset(path, root=None):
    """Read a dataset file; ``root`` makes clip paths absolute under that directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    sessions = []
    for lineno, line in enumerate(jsonl_lines(text), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc.msg}", lineno) from None
        try:
            sessions.append(session_from_dict(d, lineno, root))
        except SchemaViolation:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaViolation(str(exc), lineno) from None
    return sessions
