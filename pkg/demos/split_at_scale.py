"""
Stratified splitting on a corpus-sized manifest
===============================================

Builds 507 stub sessions spread over 20 (task, style, action) strata and
splits them 70/10/20 inside every stratum. Small strata still get a test
session, which is why totals are not simply 0.7 * 507 etc.
"""

import sys
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
import synthetic  # noqa: E402

from vid2dialog.dataset import split_sizes, stratified_split  # noqa: E402

sessions = synthetic.corpus()
print("sessions:", len(sessions))
print(Counter((s.style.value, s.action_type.value) for s in sessions))

a = stratified_split(sessions, (0.7, 0.1, 0.2), seed=0)
print("totals:", a.counts())
print("naive :", {k: round(507 * r, 1) for k, r in zip(("train", "val", "test"), (0.7, 0.1, 0.2))})

print("\nper-stratum sizes (train, val, test):")
for n in sorted({n for tasks in synthetic.LAYOUT.values() for n in tasks.values()}):
    print(f"  {n:3d} -> {split_sizes(n)}")

# same seed, same assignment, whatever the input order
b = stratified_split(list(reversed(sessions)), (0.7, 0.1, 0.2), seed=0)
print("\nseeded and order-free:", a.assignment == b.assignment)
