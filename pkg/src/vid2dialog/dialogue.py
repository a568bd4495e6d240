"""
Dialogue generation: an instruction set becomes a tagged user/expert
script, which is parsed into typed turns and checked for step coverage.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .errors import CoverageFailure, UnparseableCompletion
from .ingest import TimeSpan
from .instruction import CORRECTION_TOKEN, mark_corrections
from .llm import PromptRequest, render_template
from .validation import ValidationReport

logger = logging.getLogger(__name__)


class SpeechStyle(str, Enum):
    CONCISE = "concise"
    REGULAR = "regular"


class ActionType(str, Enum):
    FOLLOW = "follow"
    ERROR = "error"


class TurnKind(str, Enum):
    TASK_INIT = "task_init"
    STEP = "step"
    CLARIFICATION = "clarification"
    ERROR_REPORT = "error_report"
    CLOSING = "closing"


STYLE_HINTS = {
    SpeechStyle.CONCISE: "concise. The user talks in very short utterances of about 3 to 4 words, like \"Done. Next?\".",
    SpeechStyle.REGULAR: "regular. The user talks naturally in full sentences of about 10 to 11 words.",
}

ACTION_HINTS = {
    ActionType.FOLLOW: "the user performs every step correctly. Do not write any #error turns.",
    ActionType.ERROR: (
        "the user makes a mistake that the corrective steps fix. For every corrective step k, "
        "add an #error=<k> turn in which the user describes what went wrong and the expert explains the fix."
    ),
}


@dataclass
class DialogueTurn:
    index: int
    user_text: str
    expert_text: str
    kind: TurnKind
    step_ordinal: Optional[int] = None
    span: Optional[TimeSpan] = None
    clip_path: Optional[str] = None

    def __post_init__(self):
        self.kind = TurnKind(self.kind)

    def to_dict(self):
        return {
            "index": self.index,
            "kind": self.kind.value,
            "step_ordinal": self.step_ordinal,
            "user_text": self.user_text,
            "expert_text": self.expert_text,
            "span": None if self.span is None else self.span.to_dict(),
            "clip_path": self.clip_path,
        }

    @classmethod
    def from_dict(cls, d):
        span = d.get("span")
        return cls(
            index=d["index"],
            user_text=d["user_text"],
            expert_text=d["expert_text"],
            kind=TurnKind(d["kind"]),
            step_ordinal=d.get("step_ordinal"),
            span=None if span is None else TimeSpan.from_dict(span),
            clip_path=d.get("clip_path"),
        )


@dataclass
class Conversation:
    turns: list
    task: str
    style: SpeechStyle
    action_type: ActionType
    source_recording_id: str = ""

    def __post_init__(self):
        self.style = SpeechStyle(self.style)
        self.action_type = ActionType(self.action_type)

    def __len__(self):
        return len(self.turns)

    def step_turns(self):
        return [t for t in self.turns if t.kind is TurnKind.STEP]

    def to_dict(self):
        return {
            "task": self.task,
            "style": self.style.value,
            "action_type": self.action_type.value,
            "source_recording_id": self.source_recording_id,
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            turns=[DialogueTurn.from_dict(t) for t in d["turns"]],
            task=d["task"],
            style=SpeechStyle(d["style"]),
            action_type=ActionType(d["action_type"]),
            source_recording_id=d.get("source_recording_id", ""),
        )


def renumber(turns):
    return [replace(t, index=i) for i, t in enumerate(turns, start=1)]


# ---------------------------------------------------------------------------
# Script parsing
# ---------------------------------------------------------------------------

_MARKER_RE = re.compile(r"^\s*#\s*(init|step|error|clarify|closing)\s*(?:=\s*(\d+))?\s*$", re.IGNORECASE)
_SPEAKER_RE = re.compile(r"^\s*[*_]*\s*(user|expert)\s*[*_]*\s*:\s*[*_]*\s*(.*)$", re.IGNORECASE)

_MARKER_KINDS = {
    "init": TurnKind.TASK_INIT,
    "step": TurnKind.STEP,
    "error": TurnKind.ERROR_REPORT,
    "clarify": TurnKind.CLARIFICATION,
    "closing": TurnKind.CLOSING,
}


def parse_script(text):
    """Parse a tagged script into ``[(kind or None, ordinal or None, user, expert)]``."""
    pairs = []
    marker = (None, None)
    cur = None  # [kind, ordinal, user_lines, expert_lines, speaker]

    def flush():
        nonlocal cur
        if cur is None:
            return
        user = " ".join(cur[2]).strip()
        expert = " ".join(cur[3]).strip()
        if not user or not expert:
            raise UnparseableCompletion(f"turn {len(pairs) + 1} lacks a {'user' if not user else 'expert'} line")
        pairs.append((cur[0], cur[1], user, expert))
        cur = None

    for line in text.splitlines():
        m = _MARKER_RE.match(line)
        if m:
            flush()
            marker = (_MARKER_KINDS[m.group(1).lower()], int(m.group(2)) if m.group(2) else None)
            continue
        m = _SPEAKER_RE.match(line)
        if m:
            who, said = m.group(1).lower(), m.group(2).strip()
            if who == "user":
                flush()
                cur = [marker[0], marker[1], [said], [], "user"]
                marker = (None, None)
            else:
                if cur is None:
                    raise UnparseableCompletion("EXPERT line without a preceding USER line")
                cur[3].append(said)
                cur[4] = "expert"
            continue
        if cur is not None and line.strip():
            cur[2 if cur[4] == "user" else 3].append(line.strip())
    flush()
    if not pairs:
        raise UnparseableCompletion("no USER/EXPERT turns found")
    return pairs


def script_to_turns(pairs):
    turns = []
    last_step = None
    for i, (kind, ordinal, user, expert) in enumerate(pairs):
        if kind is None:
            if i == 0:
                kind = TurnKind.TASK_INIT
            elif i == len(pairs) - 1:
                kind = TurnKind.CLOSING
            else:
                kind, ordinal = TurnKind.CLARIFICATION, last_step
        if kind is TurnKind.STEP:
            last_step = ordinal
        if kind in (TurnKind.TASK_INIT, TurnKind.CLOSING):
            ordinal = None
        turns.append(DialogueTurn(i + 1, user, expert, kind, ordinal))
    return turns


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(conv, iset):
    """Structural check of a conversation against its instruction set."""
    report = ValidationReport()
    n = len(iset.steps)
    turns = conv.turns
    if not turns:
        report.add("empty", "conversation has no turns")
        return report

    for pos, t in enumerate(turns, start=1):
        if t.index != pos:
            report.add("ordering", f"turn at position {pos} is numbered {t.index}")
        if not t.user_text.strip():
            report.add("empty text", f"turn {pos} has empty user text")
        if not t.expert_text.strip():
            report.add("empty text", f"turn {pos} has empty expert text")
        if t.kind is TurnKind.TASK_INIT and pos != 1:
            report.add("ordering", f"task_init turn at position {pos}")
        if t.kind is TurnKind.CLOSING and pos != len(turns):
            report.add("ordering", f"closing turn at position {pos}")
    if turns[0].kind is not TurnKind.TASK_INIT:
        report.add("ordering", "first turn is not task_init")
    if turns[-1].kind is not TurnKind.CLOSING:
        report.add("ordering", "last turn is not closing")

    step_seq = []
    for t in conv.step_turns():
        if t.step_ordinal is None:
            report.add("coverage", f"step turn {t.index} has no step ordinal")
        elif not 1 <= t.step_ordinal <= n:
            report.add("coverage", f"step turn {t.index} names step {t.step_ordinal} outside 1..{n}")
        else:
            step_seq.append(t.step_ordinal)
    counts = Counter(step_seq)
    for k in range(1, n + 1):
        if counts[k] == 0:
            report.add("coverage", f"step {k} uncovered")
        elif counts[k] > 1:
            report.add("coverage", f"step {k} covered {counts[k]} times")
    if any(b <= a for a, b in zip(step_seq, step_seq[1:])):
        report.add("ordering", f"step turns out of order: {step_seq}")

    last = 0
    for t in turns:
        if t.kind is TurnKind.STEP and t.step_ordinal is not None:
            last = t.step_ordinal
        elif t.kind in (TurnKind.CLARIFICATION, TurnKind.ERROR_REPORT):
            allowed = {last} if t.kind is TurnKind.CLARIFICATION else {last, last + 1}
            if t.step_ordinal is None or t.step_ordinal not in allowed:
                report.add("ordering", f"{t.kind.value} turn {t.index} refers to step {t.step_ordinal} after step {last}")

    errors = [t for t in turns if t.kind is TurnKind.ERROR_REPORT]
    if conv.action_type is ActionType.FOLLOW:
        for t in errors:
            report.add("error mode", f"error_report turn {t.index} in a follow-mode conversation")
    else:
        if not errors:
            report.add("error mode", "error-mode conversation has no error_report turn")
        reported = {t.step_ordinal for t in errors}
        for s in iset.steps:
            if s.is_correction and s.ordinal not in reported:
                report.add("error mode", f"correction step {s.ordinal} has no error report")
    return report


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _kwargs(model_id, temperature):
    kw = {}
    if model_id:
        kw["model_id"] = model_id
    if temperature is not None:
        kw["temperature"] = temperature
    return kw


def dialogue_request(iset, style, action_type, *, token=CORRECTION_TOKEN, attempt=0, model_id=None, temperature=None):
    variables = {
        "task": iset.task,
        "count": len(iset.steps),
        "steps": mark_corrections(iset, token),
        "token": token,
        "style_hint": STYLE_HINTS[SpeechStyle(style)],
        "action_hint": ACTION_HINTS[ActionType(action_type)],
    }
    return PromptRequest(
        render_template("dialogue_system", {}),
        render_template("dialogue_user", variables),
        attempt=attempt,
        **_kwargs(model_id, temperature),
    )


def generate(
    iset,
    style,
    action_type,
    client,
    *,
    token=CORRECTION_TOKEN,
    clarifications=True,
    model_id=None,
    temperature=None,
):
    """Generate a conversation whose step turns map one-to-one onto ``iset``'s steps.

    Unparseable scripts and scripts that fail validation are regenerated
    once; the second failure is raised.
    """
    style, action_type = SpeechStyle(style), ActionType(action_type)
    if action_type is ActionType.ERROR and not iset.has_corrections:
        raise ValueError(f"{iset.recording_id}: error mode needs at least one correction step")

    conv = None
    for attempt in range(2):
        request = dialogue_request(iset, style, action_type, token=token, attempt=attempt, model_id=model_id, temperature=temperature)
        completion = client.complete(request)
        try:
            turns = script_to_turns(parse_script(completion.text))
        except UnparseableCompletion as exc:
            if attempt == 1:
                raise UnparseableCompletion(f"{iset.recording_id}: {exc} (after one retry)") from exc
            logger.info("%s: unparseable dialogue script (%s); regenerating", iset.recording_id, exc)
            continue
        conv = Conversation(turns, iset.task, style, action_type, iset.recording_id)
        report = validate(conv, iset)
        if report.ok:
            break
        if attempt == 1:
            raise CoverageFailure(f"{iset.recording_id} {style.value}/{action_type.value}:\n{report}")
        logger.info("%s: generated dialogue failed validation; regenerating\n%s", iset.recording_id, report)

    if clarifications and iset.has_caveats:
        extra = generate_clarifications(iset, client, model_id=model_id, temperature=temperature)
        conv = insert_clarifications(conv, extra)
    return conv


def _fallback_clarification(step, caveat):
    action = step.text.rstrip(".").lower()
    return DialogueTurn(
        0,
        f"Is there anything I should watch out for when I {action}?",
        caveat,
        TurnKind.CLARIFICATION,
        step.ordinal,
    )


def generate_clarifications(iset, client, *, model_id=None, temperature=None):
    """One clarification turn per caveat, in step order.

    If the model's answer does not line up with the caveats, plain
    template turns are used instead, so this never fails on parsing.
    """
    items = [(s, c) for s in iset.steps for c in s.caveats]
    if not items:
        return []
    listing = "\n".join(f"step {s.ordinal}: {s.text} | caveat: {c}" for s, c in items)
    request = PromptRequest(
        render_template("clarify_system", {}),
        render_template("clarify_user", {"task": iset.task, "count": len(items), "items": listing}),
        **_kwargs(model_id, temperature),
    )
    text = client.complete(request).text
    try:
        pairs = parse_script(text)
    except UnparseableCompletion:
        pairs = []
    ordinals = [o for _, o, _, _ in pairs]
    if len(pairs) != len(items) or ordinals != [s.ordinal for s, _ in items]:
        logger.warning("%s: clarification answer did not match %d caveats; using templates", iset.recording_id, len(items))
        return [_fallback_clarification(s, c) for s, c in items]
    return [DialogueTurn(0, u, e, TurnKind.CLARIFICATION, o) for (_, o, u, e) in pairs]


def insert_clarifications(conv, clarifications):
    """Place each clarification right after its step's turn (after earlier clarifications for that step)."""
    by_step = {}
    for t in clarifications:
        by_step.setdefault(t.step_ordinal, []).append(t)
    out = []
    for t in conv.turns:
        out.append(t)
        if t.kind is TurnKind.STEP and t.step_ordinal in by_step:
            out.extend(by_step.pop(t.step_ordinal))
    if by_step:
        raise ValueError(f"clarifications refer to steps without turns: {sorted(by_step)}")
    return replace(conv, turns=renumber(out))


def word_count(text):
    """Whitespace tokens, ignoring tokens made only of punctuation."""
    return sum(1 for tok in text.split() if any(ch.isalnum() for ch in tok))
