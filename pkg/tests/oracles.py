"""
Brute-force reference implementations used to check the metrics.

Written independently of vid2dialog.evaluation.metrics: n-grams are found
by scanning every window and comparing lists, and LCS by enumerating every
subsequence of the shorter side.
"""

import itertools
import math


def windows(tokens, n):
    return [tokens[i : i + n] for i in range(len(tokens) - n + 1)]


def count_in(gram, grams):
    return sum(1 for g in grams if g == gram)


def clipped_matches(cand, ref, n):
    cgrams, rgrams = windows(cand, n), windows(ref, n)
    seen = []
    total = 0
    for g in cgrams:
        if g in seen:
            continue
        seen.append(g)
        total += min(count_in(g, cgrams), count_in(g, rgrams))
    return total


def bleu(cands, refs, max_n=4):
    matches = [sum(clipped_matches(c, r, n) for c, r in zip(cands, refs)) for n in range(1, max_n + 1)]
    totals = [sum(max(0, len(c) - n + 1) for c in cands) for n in range(1, max_n + 1)]
    used = [i for i in range(max_n) if totals[i] > 0]
    if not used:
        return 0.0
    product = 1.0
    for i in used:
        if matches[i] == 0:
            return 0.0
        product *= matches[i] / totals[i]
    c = sum(len(x) for x in cands)
    r = sum(len(x) for x in refs)
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * product ** (1 / len(used))


def sentence_bleu(cand, ref, max_n=4):
    if not cand or clipped_matches(cand, ref, 1) == 0:
        return 0.0
    logs = [math.log(clipped_matches(cand, ref, 1) / len(cand))]
    for n in range(2, max_n + 1):
        logs.append(math.log((clipped_matches(cand, ref, n) + 1) / (max(0, len(cand) - n + 1) + 1)))
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(sum(logs) / max_n)


def _f(m, a, b):
    if m == 0 or a == 0 or b == 0:
        return (0.0, 0.0, 0.0)
    p, r = m / a, m / b
    return (p, r, 2 * p * r / (p + r))


def rouge_n(cand, ref, n):
    a, b = max(0, len(cand) - n + 1), max(0, len(ref) - n + 1)
    if a == 0 and b == 0:
        return (1.0, 1.0, 1.0) if cand and cand == ref else (0.0, 0.0, 0.0)
    return _f(clipped_matches(cand, ref, n), a, b)


def is_subsequence(seq, of):
    it = iter(of)
    return all(any(x == y for y in it) for x in seq)


def lcs_length(a, b):
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for k in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), k):
            if is_subsequence([short[i] for i in idx], long_):
                return k
    return 0


def rouge_l(cand, ref):
    if not cand or not ref:
        return (0.0, 0.0, 0.0)
    return _f(lcs_length(cand, ref), len(cand), len(ref))


def segmentation(pred, truth, duration, resolution):
    """Per-cell labelling with plain loops; maps are ``{ordinal: (start, end)}``.

    Returns ``(mean_iou, precision, accuracy, per_step)``.
    """
    n = max(1, math.ceil(duration / resolution - 1e-9))

    def label(spans, i):
        centre = (i + 0.5) * resolution
        hit = 0
        for k in sorted(spans):
            s, e = spans[k]
            if s <= centre < e:
                hit = k
        return hit

    gt = [label(truth, i) for i in range(n)]
    pr = [label(pred, i) for i in range(n)]
    per_step = {}
    for k in sorted(truth):
        if k not in gt:
            continue
        both = sum(1 for a, b in zip(gt, pr) if a == k and b == k)
        either = sum(1 for a, b in zip(gt, pr) if a == k or b == k)
        per_step[k] = both / either
    predicted = sum(1 for b in pr if b != 0)
    correct_fg = sum(1 for a, b in zip(gt, pr) if b != 0 and a == b)
    precision = correct_fg / predicted if predicted else 0.0
    accuracy = sum(1 for a, b in zip(gt, pr) if a == b) / n
    return sum(per_step.values()) / len(per_step), precision, accuracy, per_step
