"""
Acceptance criteria, one test each.

Every test records a PASS or FAIL line in ``RESULTS``; conftest prints them
in the terminal summary so ``pytest -v`` shows one line per criterion.
"""

import functools
import math
import random
import sys
import time
from collections import defaultdict

import pytest

import oracles
import synthetic
from conftest import FIXTURE, fixture_config
from vid2dialog import cli
from vid2dialog._io import read_jsonl
from vid2dialog.dataset import read_dataset, stratified_split
from vid2dialog.dialogue import TurnKind, validate, word_count
from vid2dialog.evaluation import METRICS, MetricRecord, aggregate
from vid2dialog.evaluation.metrics import bleu, rouge_l, rouge_n, sentence_bleu, tokenize
from vid2dialog.ingest import TimeSpan
from vid2dialog.llm import LiveBackend
from vid2dialog.localize import StepSpanMap, score_segmentation

pytestmark = pytest.mark.acceptance

RESULTS = []


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                RESULTS.append(f"criterion {number} FAIL  {title}: {type(exc).__name__}: {exc}".splitlines()[0])
                print(RESULTS[-1])
                raise
            RESULTS.append(f"criterion {number} PASS  {title}" + (f" ({detail})" if detail else ""))
            print(RESULTS[-1])

        return run

    return wrap


def random_pair(rng):
    vocab = [f"w{i}" for i in range(rng.randint(2, 8))]
    c = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
    r = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
    return c, r


@criterion(1, "metrics agree with brute-force oracles to 1e-9")
def test_metric_oracle_equivalence():
    rng = random.Random(20240611)
    t0 = time.perf_counter()
    pairs = [random_pair(rng) for _ in range(300)]
    for c, r in pairs:
        cs, rs = " ".join(c), " ".join(r)
        assert abs(bleu([cs], [rs]) - oracles.bleu([c], [r])) <= 1e-9
        assert abs(sentence_bleu(cs, rs) - oracles.sentence_bleu(c, r)) <= 1e-9
        for n in (1, 2):
            for got, want in zip(rouge_n(cs, rs, n), oracles.rouge_n(c, r, n)):
                assert abs(got - want) <= 1e-9
        for got, want in zip(rouge_l(cs, rs), oracles.rouge_l(c, r)):
            assert abs(got - want) <= 1e-9
    corpora = [[random_pair(rng) for _ in range(rng.randint(1, 6))] for _ in range(50)]
    for corpus in corpora:
        cands, refs = [c for c, _ in corpus], [r for _, r in corpus]
        got = bleu([" ".join(c) for c in cands], [" ".join(r) for r in refs])
        assert abs(got - oracles.bleu(cands, refs)) <= 1e-9
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    return f"{len(pairs)} pairs + {len(corpora)} corpora in {elapsed:.2f}s"


@criterion(2, "identity and disjoint-vocabulary cases")
def test_identity_and_zero():
    text = "pour the hot water slowly over the grounds"
    assert bleu([text], [text]) == 1.0
    assert rouge_n(text, text, 1).f1 == 1.0
    assert rouge_n(text, text, 2).f1 == 1.0
    assert rouge_l(text, text).f1 == 1.0
    other = "tighten every lug nut firmly"
    assert not set(tokenize(text)) & set(tokenize(other))
    assert bleu([other], [text]) == 0.0
    assert sentence_bleu(other, text) == 0.0
    assert rouge_n(other, text, 1) == (0.0, 0.0, 0.0)
    assert rouge_n(other, text, 2) == (0.0, 0.0, 0.0)
    assert rouge_l(other, text) == (0.0, 0.0, 0.0)


@criterion(3, "segmentation scoring on the constructed case")
def test_constructed_segmentation():
    truth = StepSpanMap("r", {1: TimeSpan(0, 10)})
    got = score_segmentation(StepSpanMap("r", {1: TimeSpan(5, 15)}), truth, duration=20, resolution=1)
    assert abs(got.mean_iou - 1 / 3) <= 1e-9
    assert abs(got.accuracy - 0.5) <= 1e-9
    iou, _, acc, _ = oracles.segmentation({1: (5, 15)}, {1: (0, 10)}, 20, 1)
    assert abs(iou - 1 / 3) <= 1e-9 and abs(acc - 0.5) <= 1e-9
    assert score_segmentation(truth, truth, 20, 1).as_tuple() == (1.0, 1.0, 1.0)
    return f"IoU={got.mean_iou:.12f} acc={got.accuracy}"


@criterion(4, "507-session synthetic corpus splits 355/44/108")
def test_split_reproduction():
    sessions = synthetic.corpus()
    assert len(sessions) == 507
    counts = stratified_split(sessions, (0.7, 0.1, 0.2), seed=0).counts()
    assert counts == {"train": 355, "val": 44, "test": 108}
    return "{train}/{val}/{test}".format(**counts)


GEN = ("ingest", "instructions", "dialogues", "localize", "assemble")


@criterion(5, "fixture replay ingest to assemble is byte-identical and valid")
def test_end_to_end_determinism(tmp_path):
    t0 = time.perf_counter()
    outputs = []
    for name in ("a", "b"):
        cfg = fixture_config(tmp_path / name)
        cli.run_pipeline(cfg, stages=GEN)
        outputs.append(cfg.dataset_path.read_bytes())
    elapsed = time.perf_counter() - t0
    assert outputs[0] == outputs[1]
    sessions = read_dataset(cfg.dataset_path)
    assert len({s.source_recording_id for s in sessions}) == 4
    for s in sessions:
        report = validate(s.conversation, s.instruction_set)
        assert report.messages() == [], report.messages()
        ordinals = [t.step_ordinal for t in s.conversation.turns if t.kind is TurnKind.STEP]
        assert sorted(ordinals) == [st.ordinal for st in s.instruction_set.steps]
        assert len(set(ordinals)) == len(ordinals)
    assert elapsed < 30.0
    return f"{len(sessions)} sessions, two runs in {elapsed:.1f}s"


@criterion(6, "error reports appear in error sessions only")
def test_error_mode_structure(fixture_sessions):
    kinds = defaultdict(int)
    for s in fixture_sessions:
        reports = [t for t in s.conversation.turns if t.kind is TurnKind.ERROR_REPORT]
        kinds[s.action_type.value] += 1
        if s.action_type.value == "error":
            assert reports and all(t.expert_text.strip() for t in reports)
        else:
            assert reports == []
    assert kinds["error"] >= 1 and kinds["follow"] >= 1
    return ", ".join(f"{k}={v}" for k, v in sorted(kinds.items()))


@criterion(7, "concise users say fewer words than regular users")
def test_style_separation(fixture_sessions):
    words = defaultdict(list)
    for s in fixture_sessions:
        words[s.style.value].extend(word_count(t.user_text) for t in s.conversation.turns)
    concise = math.fsum(words["concise"]) / len(words["concise"])
    regular = math.fsum(words["regular"]) / len(words["regular"])
    assert concise < regular
    return f"concise {concise:.2f} vs regular {regular:.2f}"


@criterion(8, "group means recompose the overall mean in every table")
def test_recomposition(fixture_run, fixture_sessions):
    cfg, _ = fixture_run
    records = [MetricRecord(**d) for d in read_jsonl(cfg.eval_path / "records.jsonl")]
    assert records
    tables = aggregate(records, fixture_sessions)
    worst = 0.0
    for m in METRICS:
        for mode in {r.mode for r in records}:
            vals = [r.value(m) for r in records if r.mode == mode and r.value(m) is not None]
            if not vals:
                continue
            overall = math.fsum(vals) / len(vals)
            for t in tables:
                rows = [r for r in t.rows if r.key[0] == mode and r.counts[m]]
                total = sum(r.counts[m] for r in rows)
                assert total == len(vals)
                weighted = math.fsum(r.means[m] * r.counts[m] for r in rows) / total
                worst = max(worst, abs(weighted - overall))
    assert worst <= 1e-9
    return f"max gap {worst:.1e} over {len(records)} records"


class ScriptedLive(LiveBackend):
    def __init__(self, endpoint, api_key=None, **kw):
        sys.path.insert(0, str(FIXTURE))
        import scripted_model

        kw["transport"] = scripted_model.transport()
        super().__init__(endpoint, api_key, **kw)


@criterion(9, "published benchmark values NOT REPRODUCIBLE offline; substitute check: live mode writes identical tables")
def test_live_mode_substitute(tmp_path, monkeypatch, fixture_run):
    # The published scores need the original corpus and model weights. What is
    # checked here is the substitute: a live endpoint run writes the same tables.
    ref, _ = fixture_run
    monkeypatch.setattr(cli, "LiveBackend", ScriptedLive)
    monkeypatch.setenv("VID2DIALOG_ENDPOINT", "http://scripted.invalid/v1/chat/completions")
    cfg = fixture_config(tmp_path, backend="live")
    (tmp_path / "dataset.jsonl").write_bytes(ref.dataset_path.read_bytes())
    cli.cmd_eval(cfg)
    names = sorted(p.name for p in ref.eval_path.glob("*.csv"))
    assert names
    for name in names:
        assert (cfg.eval_path / name).read_bytes() == (ref.eval_path / name).read_bytes(), name
    return f"{len(names)} tables identical; published values not rerun"
