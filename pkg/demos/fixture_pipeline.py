"""
From recordings to benchmark tables on the bundled fixture
==========================================================

Runs every stage against the four mock recordings in tests/fixtures, using
the recorded cassettes so no model endpoint is needed, then prints a few of
the generated turns and the headline scores.

    python demos/fixture_pipeline.py [run_dir]
"""

import sys
import tempfile
from pathlib import Path

from vid2dialog.cli import cmd_eval, load_config, run_pipeline
from vid2dialog.dataset import read_dataset
from vid2dialog.dialogue import TurnKind

FIXTURE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "pipeline"
run_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="vid2dialog-"))

cfg = load_config(FIXTURE / "config.toml", {"run_dir": str(run_dir)})
for stage, summary in run_pipeline(cfg).items():
    print(f"{stage:13s} {summary}")

sessions = read_dataset(cfg.dataset_path)

# one session of each flavour
seen = set()
for s in sessions:
    key = (s.style.value, s.action_type.value)
    if key in seen:
        continue
    seen.add(key)
    print(f"\n--- {s.task} / {key[0]} / {key[1]}  ({len(s.conversation)} turns, split={s.split})")
    for t in s.conversation.turns[:4]:
        print(f"  [{t.kind.value}] USER: {t.user_text}")
        print(f"  {' ' * (len(t.kind.value) + 2)} EXPERT: {t.expert_text}")
    errors = [t for t in s.conversation.turns if t.kind is TurnKind.ERROR_REPORT]
    for t in errors:
        print(f"  [error_report, turn {t.index}] USER: {t.user_text}")

print()
summary = cmd_eval(cfg)
for key, value in summary.items():
    print(f"{key:34s} {value}")
print(f"\nreports written under {cfg.run_path / 'reports'}")
