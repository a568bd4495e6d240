"""
Text overlap and segmentation scores
====================================

A short walk through the scorers used by the benchmark: corpus BLEU,
smoothed sentence BLEU, ROUGE-1/2/L, and cell-wise IoU for step spans.
"""

from vid2dialog.evaluation.metrics import bleu, rouge_l, rouge_n, sentence_bleu, tokenize
from vid2dialog.ingest import TimeSpan
from vid2dialog.localize import StepSpanMap, score_segmentation

reference = "Fold the paper filter into a semicircle."
candidates = [
    "Fold the paper filter into a semicircle.",
    "Now fold the filter into a semicircle.",
    "Fold it.",
    "Grind the beans.",
]

# tokens are lower-cased and stripped of punctuation before counting
print(tokenize(reference))
print()

print(f"{'candidate':42s} {'bleu':>6s} {'sbleu':>6s} {'r1':>6s} {'r2':>6s} {'rL':>6s}")
for c in candidates:
    row = (bleu([c], [reference]), sentence_bleu(c, reference), rouge_n(c, reference, 1).f1, rouge_n(c, reference, 2).f1, rouge_l(c, reference).f1)
    print(f"{c:42s} " + " ".join(f"{v:6.3f}" for v in row))

# Corpus BLEU pools n-gram counts before taking the geometric mean,
# so it is not the average of the per-sentence values.
print()
print("corpus bleu over all four:", round(bleu(candidates, [reference] * 4), 4))

# Segmentation: truth covers 0-10 s, the prediction is late by about 5 s.
# Finer cells track the fractional boundaries more closely.
truth = StepSpanMap("demo", {1: TimeSpan(0, 10), 2: TimeSpan(10, 16)})
pred = StepSpanMap("demo", {1: TimeSpan(5.3, 14.7), 2: TimeSpan(14.7, 17.2)})
for res in (1.0, 0.5, 0.1):
    s = score_segmentation(pred, truth, duration=20, resolution=res)
    print(f"resolution {res:4.1f}s  mIoU {s.mean_iou:.3f}  precision {s.precision:.3f}  accuracy {s.accuracy:.3f}  {s.per_step_iou}")
