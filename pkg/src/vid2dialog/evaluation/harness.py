"""
Turn-level benchmark: prompts, teacher-forced inference, judging and
per-turn metric records.
"""

import logging
import math
import re
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional

from .._pool import pool_map
from ..errors import LLMError, UnparseableScore
from ..instruction import plain_step_list
from ..llm import EVAL_TEMPERATURE, TURN_MAX_TOKENS, PromptRequest, render_template
from .metrics import bleu, rouge_l, rouge_n, sentence_bleu

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATE_MODEL = "gemma-3-4b-it"
DEFAULT_JUDGE_MODEL = "gemma-3-12b-it"
JUDGE_MAX_TOKENS = 256


class PromptMode(str, Enum):
    HINT_ONLY = "hint_only"
    HINT_PLUS_STEPS = "hint_plus_steps"


@dataclass(frozen=True)
class PredictedResponse:
    session_id: str
    turn_index: int
    mode: PromptMode
    text: str

    @property
    def key(self):
        return (self.session_id, self.turn_index, PromptMode(self.mode).value)

    def to_dict(self):
        return {"session_id": self.session_id, "turn_index": self.turn_index, "mode": PromptMode(self.mode).value, "text": self.text}

    @classmethod
    def from_dict(cls, d):
        return cls(d["session_id"], int(d["turn_index"]), PromptMode(d["mode"]), d["text"])


@dataclass(frozen=True)
class TurnFailure:
    session_id: str
    turn_index: int
    mode: str
    stage: str
    error: str

    def to_dict(self):
        return asdict(self)


@dataclass
class InferenceRun:
    predictions: list
    errors: list

    def __len__(self):
        return len(self.predictions)


def _turn(session, turn_index):
    turns = session.conversation.turns
    if not 1 <= turn_index <= len(turns) or turns[turn_index - 1].index != turn_index:
        raise IndexError(f"{session.session_id} has no turn {turn_index}")
    return turns[turn_index - 1]


def history_text(session, turn_index):
    """Role-tagged ground-truth history ending with the target turn's user line."""
    target = _turn(session, turn_index)
    lines = []
    for t in session.conversation.turns[: turn_index - 1]:
        lines.append(f"USER: {t.user_text}")
        lines.append(f"EXPERT: {t.expert_text}")
    lines.append(f"USER: {target.user_text}")
    return "\n".join(lines)


def build_prompt(session, turn_index, mode, *, model_id=DEFAULT_CANDIDATE_MODEL):
    mode = PromptMode(mode)
    if mode is PromptMode.HINT_PLUS_STEPS:
        system = render_template("assist_hint_steps", {"steps": plain_step_list(session.instruction_set)})
    else:
        system = render_template("assist_hint", {})
    return PromptRequest(
        system,
        history_text(session, turn_index),
        temperature=EVAL_TEMPERATURE,
        max_output_tokens=TURN_MAX_TOKENS,
        model_id=model_id,
    )


def run_inference(sessions, mode, client, *, model_id=DEFAULT_CANDIDATE_MODEL, split=None, jobs=1):
    """One teacher-forced prediction per turn of each session.

    Client errors are collected per turn; the run carries on.
    """
    mode = PromptMode(mode)
    targets = [(s, t.index) for s in sessions if split is None or s.split == split for t in s.conversation.turns]

    def one(target):
        s, idx = target
        try:
            text = client.complete(build_prompt(s, idx, mode, model_id=model_id)).text.strip()
        except LLMError as exc:
            logger.warning("%s turn %d (%s): %s", s.session_id, idx, mode.value, exc)
            return TurnFailure(s.session_id, idx, mode.value, "inference", str(exc))
        return PredictedResponse(s.session_id, idx, mode, text)

    results = pool_map(one, targets, jobs)
    return InferenceRun(
        [r for r in results if isinstance(r, PredictedResponse)],
        [r for r in results if isinstance(r, TurnFailure)],
    )


# ---------------------------------------------------------------------------
# Judge
# ---------------------------------------------------------------------------

# scale mentions that would otherwise be read as the score
_SCALE_RE = re.compile(
    r"(?:\bout\s+of\s+\d+\b|/\s*\d+\b|\b\d+\s*(?:-|–|to)\s*\d+\b|\bscale\s+of\s+\d+\b)",
    re.IGNORECASE,
)
_INT_RE = re.compile(r"(?<![\w.])(\d+)(?!\w|\.\d)")


def parse_judge_score(text):
    """The last standalone integer once scale mentions are removed, if it is 1-5."""
    cleaned = _SCALE_RE.sub(" ", text)
    found = _INT_RE.findall(cleaned)
    if not found:
        return None
    value = int(found[-1])
    return value if 1 <= value <= 5 else None


@dataclass(frozen=True)
class JudgeResult:
    score: int
    rationale: str


def judge_request(session, turn_index, prediction, *, with_reference=True, model_id=DEFAULT_JUDGE_MODEL):
    target = _turn(session, turn_index)
    variables = {"task": session.task, "history": history_text(session, turn_index), "candidate": prediction}
    if with_reference:
        variables["reference"] = target.expert_text
    return PromptRequest(
        render_template("judge_system", {}),
        render_template("judge_user" if with_reference else "judge_user_noref", variables),
        temperature=EVAL_TEMPERATURE,
        max_output_tokens=JUDGE_MAX_TOKENS,
        model_id=model_id,
    )


def judge(session, turn_index, prediction, judge_client, *, with_reference=True, model_id=DEFAULT_JUDGE_MODEL):
    """Grade one predicted expert reply on a 1-5 scale."""
    request = judge_request(session, turn_index, prediction, with_reference=with_reference, model_id=model_id)
    text = judge_client.complete(request).text
    score = parse_judge_score(text)
    if score is not None:
        return JudgeResult(score, text)
    reask = PromptRequest(
        request.system_text,
        render_template("judge_reask", {"prompt": request.user_text, "previous": text}),
        temperature=request.temperature,
        max_output_tokens=request.max_output_tokens,
        model_id=request.model_id,
        attempt=1,
    )
    text2 = judge_client.complete(reask).text
    score = parse_judge_score(text2)
    if score is None:
        raise UnparseableScore(f"{session.session_id} turn {turn_index}: no score in {text2[-80:]!r}")
    return JudgeResult(score, f"{text}\n---\n{text2}")


# ---------------------------------------------------------------------------
# Metric records
# ---------------------------------------------------------------------------

METRICS = ("bleu", "rouge1", "rouge2", "rougeL", "judge")


@dataclass
class MetricRecord:
    session_id: str
    turn_index: int
    mode: str
    bleu: float
    rouge1: float
    rouge2: float
    rougeL: float
    judge: Optional[int] = None
    rouge1_p: float = 0.0
    rouge1_r: float = 0.0
    rouge2_p: float = 0.0
    rouge2_r: float = 0.0
    rougeL_p: float = 0.0
    rougeL_r: float = 0.0

    def __post_init__(self):
        self.mode = PromptMode(self.mode).value
        for name in ("bleu", "rouge1", "rouge2", "rougeL", "rouge1_p", "rouge1_r", "rouge2_p", "rouge2_r", "rougeL_p", "rougeL_r"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.judge is not None and self.judge not in (1, 2, 3, 4, 5):
            raise ValueError(f"judge score {self.judge} outside 1-5")

    @property
    def key(self):
        return (self.session_id, self.turn_index, self.mode)

    def value(self, metric):
        return getattr(self, metric)


def score_turn(candidate, reference):
    r1, r2, rl = rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2), rouge_l(candidate, reference)
    return {
        "bleu": sentence_bleu(candidate, reference),
        "rouge1": r1.f1,
        "rouge2": r2.f1,
        "rougeL": rl.f1,
        "rouge1_p": r1.precision,
        "rouge1_r": r1.recall,
        "rouge2_p": r2.precision,
        "rouge2_r": r2.recall,
        "rougeL_p": rl.precision,
        "rougeL_r": rl.recall,
    }


def score_predictions(sessions, predictions, judge_client=None, *, with_reference=True, judge_model=DEFAULT_JUDGE_MODEL, jobs=1):
    """Metric records for each prediction, plus judge failures.

    A turn whose judge answer stays unparseable keeps its n-gram metrics
    and gets no judge score.
    """
    by_id = {s.session_id: s for s in sessions}
    for p in predictions:
        if p.session_id not in by_id:
            raise KeyError(f"prediction for unknown session {p.session_id}")

    def one(p):
        s = by_id[p.session_id]
        ref = _turn(s, p.turn_index).expert_text
        fields = score_turn(p.text, ref)
        failure = None
        if judge_client is not None:
            try:
                fields["judge"] = judge(s, p.turn_index, p.text, judge_client, with_reference=with_reference, model_id=judge_model).score
            except (UnparseableScore, LLMError) as exc:
                logger.warning("judge failed on %s turn %d: %s", p.session_id, p.turn_index, exc)
                failure = TurnFailure(p.session_id, p.turn_index, PromptMode(p.mode).value, "judge", str(exc))
        return MetricRecord(p.session_id, p.turn_index, p.mode, **fields), failure

    results = pool_map(one, list(predictions), jobs)
    return [r for r, _ in results], [f for _, f in results if f is not None]


def headline(sessions, predictions, records):
    """Per-mode corpus BLEU next to the mean per-turn scores."""
    by_id = {s.session_id: s for s in sessions}
    out = {}
    for mode in sorted({PromptMode(p.mode).value for p in predictions}):
        preds = [p for p in predictions if PromptMode(p.mode).value == mode]
        recs = [r for r in records if r.mode == mode]
        refs = [_turn(by_id[p.session_id], p.turn_index).expert_text for p in preds]
        row = {"turns": len(preds), "corpus_bleu": bleu([p.text for p in preds], refs)}
        for m in METRICS:
            vals = [r.value(m) for r in recs if r.value(m) is not None]
            row[f"mean_{m}"] = math.fsum(vals) / len(vals) if vals else None
        out[mode] = row
    return out
