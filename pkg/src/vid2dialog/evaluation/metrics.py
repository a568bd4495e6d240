"""
BLEU and ROUGE over lightly normalised tokens.

Tokens are lowercased whitespace pieces with surrounding punctuation
stripped; pieces that are only punctuation are dropped.
"""

import math
import string
from collections import Counter
from typing import NamedTuple

from ..errors import EmptyInput

_STRIP = string.punctuation + "“”‘’«»…–—"


def tokenize(text):
    if isinstance(text, (list, tuple)):
        return list(text)
    out = []
    for piece in text.lower().split():
        piece = piece.strip(_STRIP)
        if piece:
            out.append(piece)
    return out


def ngram_counts(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(cand, ref, n):
    c, r = ngram_counts(cand, n), ngram_counts(ref, n)
    return sum(min(k, r[g]) for g, k in c.items()), max(len(cand) - n + 1, 0)


def _brevity_penalty(c, r):
    if c == 0:
        return 0.0
    return 1.0 if c >= r else math.exp(1.0 - r / c)


def bleu(candidates, references, max_n=4):
    """Corpus BLEU with one reference per candidate.

    Clipped n-gram matches and totals are pooled over the corpus before
    taking precisions. Orders for which the corpus has no candidate n-gram
    at all are left out of the geometric mean.
    """
    if isinstance(candidates, str) or isinstance(references, str):
        raise TypeError("bleu takes lists of strings; use sentence_bleu for a single pair")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyInput("bleu needs at least one candidate/reference pair")
    cands = [tokenize(c) for c in candidates]
    refs = [tokenize(r) for r in references]
    matches = [0] * max_n
    totals = [0] * max_n
    for c, r in zip(cands, refs):
        for n in range(1, max_n + 1):
            m, t = _clipped_matches(c, r, n)
            matches[n - 1] += m
            totals[n - 1] += t
    orders = [n for n in range(max_n) if totals[n] > 0]
    if not orders or any(matches[n] == 0 for n in orders):
        return 0.0
    log_p = sum(math.log(matches[n] / totals[n]) for n in orders) / len(orders)
    bp = _brevity_penalty(sum(map(len, cands)), sum(map(len, refs)))
    return bp * math.exp(log_p)


corpus_bleu = bleu


def sentence_bleu(candidate, reference, max_n=4):
    """Single-pair BLEU with add-one smoothing on orders 2 and up.

    Used for per-turn curves, where unsmoothed BLEU is zero for most
    short replies.
    """
    c, r = tokenize(candidate), tokenize(reference)
    if not c:
        return 0.0
    m1, t1 = _clipped_matches(c, r, 1)
    if m1 == 0:
        return 0.0
    log_p = math.log(m1 / t1)
    for n in range(2, max_n + 1):
        m, t = _clipped_matches(c, r, n)
        log_p += math.log((m + 1) / (t + 1))
    return _brevity_penalty(len(c), len(r)) * math.exp(log_p / max_n)


class Score(NamedTuple):
    precision: float
    recall: float
    f1: float


_ZERO = Score(0.0, 0.0, 0.0)


def _prf(matches, n_cand, n_ref):
    if matches == 0 or n_cand == 0 or n_ref == 0:
        return _ZERO
    p, r = matches / n_cand, matches / n_ref
    return Score(p, r, 2 * p * r / (p + r))


def rouge_n(candidate, reference, n):
    """Clipped n-gram overlap as (precision, recall, f1).

    Two identical non-empty texts too short to hold an n-gram score 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    c, r = tokenize(candidate), tokenize(reference)
    m, n_cand = _clipped_matches(c, r, n)
    n_ref = max(len(r) - n + 1, 0)
    if n_cand == 0 and n_ref == 0:
        return Score(1.0, 1.0, 1.0) if c and c == r else _ZERO
    return _prf(m, n_cand, n_ref)


def lcs_length(a, b):
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference):
    """Longest-common-subsequence overlap as (precision, recall, f1)."""
    c, r = tokenize(candidate), tokenize(reference)
    if not c or not r:
        return _ZERO
    return _prf(lcs_length(c, r), len(c), len(r))
