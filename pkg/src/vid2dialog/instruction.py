"""
Instruction formation: turn a narration transcript or a list of step
annotations into an ordered set of atomic instruction steps.
"""

import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import (
    AllStepsFiltered,
    EmptySteps,
    NoLocalizableSteps,
    TokenCollision,
    UnparseableCompletion,
)
from .ingest import KEPT_ERROR_LABELS, TimeSpan
from .llm import PromptRequest, render_template

logger = logging.getLogger(__name__)

CORRECTION_TOKEN = "[[CORRECTION]]"


class Provenance(str, Enum):
    NARRATION_LLM = "narration_llm"
    ANNOTATION_MERGE = "annotation_merge"
    ANNOTATION_CLUSTER = "annotation_cluster"


@dataclass
class InstructionStep:
    ordinal: int
    text: str
    span: Optional[TimeSpan] = None
    is_correction: bool = False
    source_refs: list = field(default_factory=list)
    caveats: list = field(default_factory=list)

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"step {self.ordinal} has empty text")

    def to_dict(self):
        return {
            "ordinal": self.ordinal,
            "text": self.text,
            "is_correction": self.is_correction,
            "span": None if self.span is None else self.span.to_dict(),
            "source_refs": list(self.source_refs),
            "caveats": list(self.caveats),
        }

    @classmethod
    def from_dict(cls, d):
        span = d.get("span")
        return cls(
            ordinal=d["ordinal"],
            text=d["text"],
            span=None if span is None else TimeSpan.from_dict(span),
            is_correction=d.get("is_correction", False),
            source_refs=list(d.get("source_refs", [])),
            caveats=list(d.get("caveats", [])),
        )


@dataclass
class InstructionSet:
    task: str
    recording_id: str
    steps: list
    provenance: Provenance

    def __post_init__(self):
        self.provenance = Provenance(self.provenance)
        if not self.steps:
            raise ValueError("an instruction set needs at least one step")
        ordinals = [s.ordinal for s in self.steps]
        if ordinals != list(range(1, len(self.steps) + 1)):
            raise ValueError(f"step ordinals must run 1..n, got {ordinals}")

    def __len__(self):
        return len(self.steps)

    def step(self, ordinal):
        return self.steps[ordinal - 1]

    @property
    def has_corrections(self):
        return any(s.is_correction for s in self.steps)

    @property
    def has_caveats(self):
        return any(s.caveats for s in self.steps)

    def with_spans(self, span_map):
        steps = [replace(s, span=span_map.get(s.ordinal, s.span)) for s in self.steps]
        return replace(self, steps=steps)

    def to_dict(self):
        return {
            "task": self.task,
            "recording_id": self.recording_id,
            "provenance": self.provenance.value,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            task=d["task"],
            recording_id=d["recording_id"],
            steps=[InstructionStep.from_dict(s) for s in d["steps"]],
            provenance=Provenance(d["provenance"]),
        )


# ---------------------------------------------------------------------------
# Completion parsing
# ---------------------------------------------------------------------------

_ITEM_RE = re.compile(r"^\s*(?:step\s*)?(\d+)\s*[.):]\s+(.*\S)\s*$", re.IGNORECASE)
_REFS_RE = re.compile(r"\[\s*(?:cues?|refs?)\s*:\s*([^\]]*)\]", re.IGNORECASE)
_CAVEAT_RE = re.compile(r"^\s*[-*•]\s*(?:caveat|note|tip|warning)\s*:\s*(.*\S)\s*$", re.IGNORECASE)
_COMPOUND_RE = re.compile(r"(?:\band then\b|\bthen\b|\bafterwards\b|\bafter that\b|;)", re.IGNORECASE)


def parse_numbered_list(text):
    """Return ``[(number, item_text, [continuation lines])]`` for an enumerated list."""
    items = []
    for line in text.splitlines():
        m = _ITEM_RE.match(line)
        if m:
            items.append((int(m.group(1)), m.group(2).strip(), []))
        elif items and line.strip():
            items[-1][2].append(line)
    return items


def parse_refs(spec):
    spec = spec.strip().lower()
    if not spec or spec in ("none", "-", "n/a"):
        return []
    refs = []
    for part in re.split(r"[,\s]+", spec):
        if not part:
            continue
        m = re.fullmatch(r"(\d+)\s*[-–]\s*(\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            refs.extend(range(min(lo, hi), max(lo, hi) + 1))
        elif part.isdigit():
            refs.append(int(part))
    return sorted(set(refs))


def is_atomic(step_text):
    """Cheap proxy for "one main action": no sequencing connectives."""
    return _COMPOUND_RE.search(step_text) is None


def _sentence(text):
    text = " ".join(text.split()).strip()
    return text[:1].upper() + text[1:] if text else text


def parse_step_list(text):
    """Parse an extraction completion into ``[(text, refs, caveats)]``.

    Raises ``UnparseableCompletion`` when there is no enumerated list.
    """
    items = parse_numbered_list(text)
    if not items:
        raise UnparseableCompletion("completion contains no numbered list")
    out = []
    for _, body, extra in items:
        refs = []
        for m in _REFS_RE.finditer(body):
            refs.extend(parse_refs(m.group(1)))
        body = _REFS_RE.sub("", body).strip().rstrip(" -:")
        caveats = [m.group(1) for m in map(_CAVEAT_RE.match, extra) if m]
        out.append((_sentence(body), sorted(set(refs)), caveats))
    return out


# ---------------------------------------------------------------------------
# Narration path
# ---------------------------------------------------------------------------


def _transcript_lines(subtitles):
    return "\n".join(f"[{s.index}] ({s.span.start:.1f}-{s.span.end:.1f} s) {s.text}" for s in subtitles)


def extract_from_narration(subtitles, task, client, *, recording_id="", model_id=None, temperature=None):
    """Ask the model for atomic steps, cue references and caveats.

    One re-ask with a stricter prompt is made when the first answer is not
    a numbered list or contains compound steps.
    """
    if not subtitles:
        raise ValueError("need at least one subtitle entry")
    variables = {"task": task, "transcript": _transcript_lines(subtitles)}
    extra = _llm_kwargs(model_id, temperature)

    parsed = fallback = None
    for attempt, template in enumerate(("extract_user", "extract_strict_user")):
        request = PromptRequest(
            render_template("extract_system", {}),
            render_template(template, variables),
            attempt=attempt,
            **extra,
        )
        completion = client.complete(request)
        try:
            parsed = parse_step_list(completion.text)
        except UnparseableCompletion:
            if attempt == 1 and fallback is not None:
                logger.warning("%s: re-ask unparseable; keeping the first answer", recording_id or task)
                parsed = fallback
                break
            if attempt == 1:
                raise UnparseableCompletion(
                    f"{recording_id or task}: extraction still unparseable after a stricter re-ask"
                ) from None
            logger.info("%s: extraction not a numbered list; re-asking", recording_id or task)
            continue
        compound = [t for t, _, _ in parsed if t and not is_atomic(t)]
        if compound and attempt == 0:
            logger.info("%s: %d compound step(s); re-asking", recording_id or task, len(compound))
            fallback = parsed
            continue
        if compound:
            logger.warning("%s: accepting compound steps after re-ask: %s", recording_id or task, compound)
        break

    parsed = [p for p in parsed if p[0]]
    if not parsed:
        raise EmptySteps(f"{recording_id or task}: the model listed no usable steps")

    valid = {s.index for s in subtitles}
    steps = []
    for i, (text, refs, caveats) in enumerate(parsed, start=1):
        bad = [r for r in refs if r not in valid]
        if bad:
            logger.warning("%s step %d: dropping unknown cue refs %s", recording_id or task, i, bad)
        steps.append(InstructionStep(i, text, source_refs=[r for r in refs if r in valid], caveats=caveats))
    iset = InstructionSet(task, recording_id, steps, Provenance.NARRATION_LLM)

    from .localize import localize_from_subtitles

    try:
        span_map = localize_from_subtitles(iset, subtitles)
    except NoLocalizableSteps:
        logger.warning("%s: no step cites a cue; spans left empty", recording_id or task)
        return iset
    return iset.with_spans(span_map.entries)


# ---------------------------------------------------------------------------
# Annotation paths
# ---------------------------------------------------------------------------


def _norm_desc(text):
    return " ".join(text.lower().split()).strip(" .")


def merge_duplicate_annotations(annotations, max_gap=0.0):
    """Group consecutive annotations with the same description.

    Only annotations that touch or overlap (gap <= ``max_gap``) are merged,
    so the merged span never covers time no member covered.
    Returns ``[(first_description, span, [1-based indices], is_correction)]``.
    """
    groups = []
    for idx, ann in enumerate(annotations, start=1):
        corr = ann.label in KEPT_ERROR_LABELS
        if groups:
            desc, span, refs, flag = groups[-1]
            if _norm_desc(desc) == _norm_desc(ann.description) and ann.span.start <= span.end + max_gap:
                groups[-1] = (desc, span.hull(ann.span), refs + [idx], flag or corr)
                continue
        groups.append((ann.description, ann.span, [idx], corr))
    return groups


def _llm_kwargs(model_id, temperature):
    kw = {}
    if model_id:
        kw["model_id"] = model_id
    if temperature is not None:
        kw["temperature"] = temperature
    return kw


def normalize_annotated_steps(annotations, client, *, task="", recording_id="", max_gap=0.0, model_id=None, temperature=None):
    """Merge repeated labels and have the model rewrite them as imperatives."""
    if not annotations:
        raise ValueError("need at least one step annotation")
    groups = merge_duplicate_annotations(annotations, max_gap)
    listing = "\n".join(f"{i}. {desc}" for i, (desc, _, _, _) in enumerate(groups, start=1))
    request = PromptRequest(
        render_template("normalize_system", {}),
        render_template("normalize_user", {"task": task, "count": len(groups), "steps": listing}),
        **_llm_kwargs(model_id, temperature),
    )
    items = parse_numbered_list(client.complete(request).text)
    if len(items) != len(groups):
        raise UnparseableCompletion(
            f"{recording_id or task}: expected {len(groups)} rewritten steps, got {len(items)}"
        )
    steps = []
    for i, ((_, span, refs, corr), (_, text, _)) in enumerate(zip(groups, items), start=1):
        steps.append(InstructionStep(i, _sentence(text), span=span, is_correction=corr, source_refs=refs))
    return InstructionSet(task, recording_id, steps, Provenance.ANNOTATION_MERGE)


def default_stoplist():
    text = (resources.files("vid2dialog") / "data" / "stoplist.txt").read_text(encoding="utf-8")
    return _stoplist_lines(text)


def load_stoplist(path):
    return _stoplist_lines(Path(path).read_text(encoding="utf-8"))


def _stoplist_lines(text):
    return [line.strip().lower() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]


def is_generic(description, stoplist):
    desc = " ".join(description.lower().split())
    return any(p in desc for p in stoplist)


_YESNO_RE = re.compile(r"^\s*(?:pair\s*)?(\d+)\s*[:.)\-]\s*(yes|no)\b", re.IGNORECASE)


def parse_yes_no(text, count):
    answers = {}
    for line in text.splitlines():
        m = _YESNO_RE.match(line)
        if m:
            answers[int(m.group(1))] = m.group(2).lower() == "yes"
    if sorted(answers) != list(range(1, count + 1)):
        raise UnparseableCompletion(f"expected yes/no answers for pairs 1..{count}, got {sorted(answers)}")
    return [answers[i] for i in range(1, count + 1)]


def cluster_and_filter_steps(annotations, stoplist, client, *, task="", recording_id="", model_id=None, temperature=None):
    """Drop generic actions, then fuse adjacent annotations judged to be one sub-task."""
    if not annotations:
        raise ValueError("need at least one step annotation")
    stoplist = [p.lower() for p in stoplist]
    kept = [(i, a) for i, a in enumerate(annotations, start=1) if not is_generic(a.description, stoplist)]
    if not kept:
        raise AllStepsFiltered(f"{recording_id or task}: every annotation matched the stoplist")

    same = []
    if len(kept) > 1:
        pairs = "\n".join(
            f"{k}. \"{a.description}\" | \"{b.description}\""
            for k, ((_, a), (_, b)) in enumerate(zip(kept, kept[1:]), start=1)
        )
        request = PromptRequest(
            render_template("cluster_system", {}),
            render_template("cluster_user", {"task": task, "count": len(kept) - 1, "pairs": pairs}),
            **_llm_kwargs(model_id, temperature),
        )
        same = parse_yes_no(client.complete(request).text, len(kept) - 1)

    clusters = [[kept[0]]]
    for joined, item in zip(same, kept[1:]):
        if joined:
            clusters[-1].append(item)
        else:
            clusters.append([item])

    steps = []
    for ordinal, members in enumerate(clusters, start=1):
        span = members[0][1].span
        for _, a in members[1:]:
            span = span.hull(a.span)
        steps.append(
            InstructionStep(
                ordinal,
                _sentence(members[0][1].description),
                span=span,
                is_correction=any(a.label in KEPT_ERROR_LABELS for _, a in members),
                source_refs=[i for i, _ in members],
            )
        )
    return InstructionSet(task, recording_id, steps, Provenance.ANNOTATION_CLUSTER)


def mark_corrections(iset, special_token=CORRECTION_TOKEN):
    """Numbered step list with corrective steps prefixed by ``special_token``."""
    lines = []
    for s in iset.steps:
        if special_token in s.text:
            raise TokenCollision(f"step {s.ordinal} already contains {special_token!r}")
        line = f"{s.ordinal}. {s.text}"
        lines.append(f"{special_token} {line}" if s.is_correction else line)
    return "\n".join(lines)


def plain_step_list(iset):
    return "\n".join(f"{s.ordinal}. {s.text}" for s in iset.steps)
