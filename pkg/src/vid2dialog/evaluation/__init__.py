"""Turn-level benchmark over generated dialogue sessions."""

from .harness import (
    METRICS,
    InferenceRun,
    JudgeResult,
    MetricRecord,
    PredictedResponse,
    PromptMode,
    TurnFailure,
    build_prompt,
    headline,
    judge,
    parse_judge_score,
    run_inference,
    score_predictions,
)
from .metrics import bleu, corpus_bleu, lcs_length, rouge_l, rouge_n, sentence_bleu, tokenize
from .report import ReportTable, ReportTables, aggregate, recomposition_error, write_report

__all__ = [
    "METRICS",
    "InferenceRun",
    "JudgeResult",
    "MetricRecord",
    "PredictedResponse",
    "PromptMode",
    "ReportTable",
    "ReportTables",
    "TurnFailure",
    "aggregate",
    "bleu",
    "build_prompt",
    "corpus_bleu",
    "headline",
    "judge",
    "lcs_length",
    "parse_judge_score",
    "recomposition_error",
    "rouge_l",
    "rouge_n",
    "run_inference",
    "score_predictions",
    "sentence_bleu",
    "tokenize",
    "write_report",
]
