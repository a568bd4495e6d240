"""
Command-line front end. Each subcommand runs one pipeline stage, reading
and writing plain files in a run directory:

    recordings.jsonl    ingest
    instructions.jsonl  instructions
    conversations.jsonl dialogues
    spans.csv           localize
    dataset.jsonl       assemble (split fills in the split column)
    cutlist.csv         assemble
    split.csv           split
    reports/stats/      stats
    reports/eval/       eval, report
"""

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import dataset as ds
from . import localize as loc
from ._pool import pool_map
from ._io import atomic_write_text, dumps_jsonl, jsonl_lines
from .dialogue import ActionType, Conversation, SpeechStyle, generate
from .errors import ConfigError, StageInputMissing, Vid2DialogError
from .evaluation import (
    MetricRecord,
    PredictedResponse,
    PromptMode,
    aggregate,
    headline,
    run_inference,
    score_predictions,
    write_report,
)
from .evaluation.harness import DEFAULT_CANDIDATE_MODEL, DEFAULT_JUDGE_MODEL
from .ingest import SourceKind, SourceRecording, load_manifest, partition_recordings, validate_timeline
from .instruction import (
    CORRECTION_TOKEN,
    InstructionSet,
    cluster_and_filter_steps,
    default_stoplist,
    extract_from_narration,
    is_generic,
    load_stoplist,
    normalize_annotated_steps,
)
from .llm import DEFAULT_MODEL, GENERATION_TEMPERATURE, Cassette, LiveBackend, RecordBackend, ReplayBackend

logger = logging.getLogger("vid2dialog")

STAGES = ("ingest", "instructions", "dialogues", "localize", "assemble", "split", "stats")
BACKENDS = ("live", "replay", "record")
PATH_KEYS = ("manifest", "run_dir", "stoplist", "cassette", "dataset", "eval_dir", "eval_cassette", "judge_cassette", "predictions")


@dataclass
class PipelineConfig:
    manifest: Optional[str] = None
    run_dir: str = "run"
    stoplist: Optional[str] = None
    egocentric_only: bool = True
    annotation_path: str = "normalize"
    narrated_styles: list = field(default_factory=lambda: ["regular"])
    annotated_styles: list = field(default_factory=lambda: ["concise", "regular"])
    error_mode: bool = True
    error_style: str = "regular"
    clarifications: bool = True
    correction_token: str = CORRECTION_TOKEN
    backend: str = "replay"
    cassette: Optional[str] = None
    model: str = DEFAULT_MODEL
    temperature: float = GENERATION_TEMPERATURE
    ratios: list = field(default_factory=lambda: [0.7, 0.1, 0.2])
    seed: int = 0
    jobs: int = 0
    max_in_flight: int = 4
    skip_failures: bool = False
    dry_run: bool = False
    # benchmark
    dataset: Optional[str] = None
    eval_dir: Optional[str] = None
    predictions: Optional[str] = None
    modes: list = field(default_factory=lambda: [m.value for m in PromptMode])
    eval_split: str = "test"
    eval_model: str = DEFAULT_CANDIDATE_MODEL
    eval_backend: Optional[str] = None
    eval_cassette: Optional[str] = None
    judge: bool = True
    judge_model: str = DEFAULT_JUDGE_MODEL
    judge_backend: Optional[str] = None
    judge_cassette: Optional[str] = None
    judge_reference: bool = True

    @property
    def run_path(self):
        return Path(self.run_dir)

    def file(self, name):
        return self.run_path / name

    @property
    def dataset_path(self):
        return Path(self.dataset) if self.dataset else self.file("dataset.jsonl")

    @property
    def eval_path(self):
        return Path(self.eval_dir) if self.eval_dir else self.run_path / "reports" / "eval"

    def workers(self, network=False):
        n = self.jobs or os.cpu_count() or 1
        return min(n, self.max_in_flight) if network else n

    def check(self):
        try:
            ds._fractions(self.ratios)
            for s in (*self.narrated_styles, *self.annotated_styles, self.error_style):
                SpeechStyle(s)
            for m in self.modes:
                PromptMode(m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.annotation_path not in ("normalize", "cluster"):
            raise ConfigError(f"annotation_path must be 'normalize' or 'cluster', not {self.annotation_path!r}")
        for key in ("backend", "eval_backend", "judge_backend"):
            value = getattr(self, key)
            if value is not None and value not in BACKENDS:
                raise ConfigError(f"{key} must be one of {BACKENDS}, not {value!r}")
        if self.jobs < 0 or self.max_in_flight < 1:
            raise ConfigError("jobs must be >= 0 and max_in_flight >= 1")
        if self.stoplist and not Path(self.stoplist).is_file():
            raise ConfigError(f"stoplist {self.stoplist} does not exist")
        return self


_FIELDS = {f.name: f for f in fields(PipelineConfig)}


def _coerce(key, raw):
    """Turn a command-line string into the type of the config field ``key``."""
    default = PipelineConfig()
    current = getattr(default, key)
    if isinstance(current, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"--{key} expects true/false, got {raw!r}")
    try:
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"--{key} expects a number, got {raw!r}") from None
    if isinstance(current, list):
        if raw.strip().startswith("["):
            try:
                return tomllib.loads(f"v = {raw}")["v"]
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"--{key}: {exc}") from None
        items = [x.strip() for x in raw.split(",") if x.strip()]
        return [float(x) for x in items] if key == "ratios" else items
    return raw


def load_config(path=None, overrides=None):
    """Defaults, then the TOML file, then command-line overrides.

    Relative paths in the file are taken relative to the file itself.
    """
    values = {}
    if path is not None:
        path = Path(path)
        try:
            values = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        unknown = sorted(set(values) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"{path}: unknown keys {unknown}")
        for key in PATH_KEYS:
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(path.parent / values[key])
    for key, value in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown option --{key.replace('_', '-')}")
        values[key] = value
    try:
        return PipelineConfig(**values).check()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _require(path, stage):
    path = Path(path)
    if not path.exists():
        raise StageInputMissing(f"{stage}: {path} not found; run the earlier stage first")
    return path


def _read_lines(path, stage):
    text = _require(path, stage).read_text(encoding="utf-8")
    return [json.loads(line) for line in jsonl_lines(text) if line.strip()]


def _map_recordings(cfg, fn, items, stage):
    """Apply ``fn`` to every item; failures abort unless ``skip_failures`` is set."""

    def guarded(item):
        try:
            return fn(item)
        except Vid2DialogError as exc:
            if not cfg.skip_failures:
                raise
            logger.warning("%s: skipping %s: %s", stage, getattr(item, "recording_id", item), exc)
            return None

    return [r for r in pool_map(guarded, items, cfg.workers(network=cfg.backend != "replay")) if r is not None]


@contextmanager
def _client(kind, cassette, stage, cfg, client=None):
    """Yield an LLM backend; record-mode cassettes are saved on exit."""
    if client is not None:
        yield client
        if isinstance(client, RecordBackend):
            client.cassette.save()
        return
    if kind == "replay":
        if not cassette or not Path(cassette).is_file():
            raise StageInputMissing(f"{stage}: replay backend needs a cassette; {cassette or 'none given'}")
        yield ReplayBackend(Cassette.load(cassette))
        return
    live = LiveBackend.from_env(max_in_flight=cfg.max_in_flight)
    try:
        if kind == "live":
            yield live
            return
        if not cassette:
            raise ConfigError(f"{stage}: record backend needs --cassette")
        rec = RecordBackend(Cassette.open(cassette), live)
        try:
            yield rec
        finally:
            rec.cassette.save()
    finally:
        live.close()


def _read_recordings(cfg, stage):
    return [SourceRecording.from_dict(d) for d in _read_lines(cfg.file("recordings.jsonl"), stage)]


def _read_instructions(cfg, stage):
    return [InstructionSet.from_dict(d) for d in _read_lines(cfg.file("instructions.jsonl"), stage)]


def _stoplist(cfg):
    return load_stoplist(cfg.stoplist) if cfg.stoplist else default_stoplist()


def _gen_kwargs(cfg):
    return {"model_id": cfg.model, "temperature": cfg.temperature}


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def cmd_ingest(cfg, client=None):
    if not cfg.manifest:
        raise ConfigError("ingest needs a manifest")
    _require(cfg.manifest, "ingest")
    recordings = load_manifest(cfg.manifest, jobs=cfg.workers())
    kept, lines = [], []
    for r in recordings:
        if cfg.egocentric_only and not r.egocentric:
            lines.append(f"{r.recording_id}: excluded (not egocentric)")
            continue
        report = validate_timeline(r)
        if report.ok:
            kept.append(r)
        else:
            lines.append(f"{r.recording_id}: excluded")
            lines.extend(f"  {v.kind}: {v.message}" for v in report)
    if not kept:
        raise StageInputMissing("ingest: no recording passed timeline validation")
    atomic_write_text(cfg.file("recordings.jsonl"), dumps_jsonl(r.to_dict() for r in kept))
    atomic_write_text(cfg.file("ingest_report.txt"), "".join(line + "\n" for line in lines))
    error, normal, excluded = partition_recordings(kept)
    return {
        "recordings": len(recordings),
        "kept": len(kept),
        "narrated": sum(r.source_kind is SourceKind.NARRATED for r in kept),
        "annotated_normal": sum(r.source_kind is SourceKind.ANNOTATED for r in normal),
        "annotated_error": len(error),
        "unusable_error_labels": len(excluded),
    }


def _instruction_targets(cfg, recordings):
    error, normal, excluded = partition_recordings(recordings)
    for r in excluded:
        logger.info("instructions: %s has error labels other than modification/correction; skipped", r.recording_id)
    if not cfg.error_mode:
        error = []
    keep = {r.recording_id for r in (*error, *normal)}
    return [r for r in recordings if r.recording_id in keep]


def _planning_recordings(cfg, stage):
    """Recordings for a dry run: the ingest output if present, else the manifest."""
    if cfg.file("recordings.jsonl").exists() or not cfg.manifest:
        return _read_recordings(cfg, stage)
    recordings = load_manifest(_require(cfg.manifest, stage))
    return [r for r in recordings if validate_timeline(r).ok and (r.egocentric or not cfg.egocentric_only)]


def cmd_build_instructions(cfg, client=None):
    if cfg.dry_run:
        recordings = _instruction_targets(cfg, _planning_recordings(cfg, "instructions"))
    else:
        recordings = _instruction_targets(cfg, _read_recordings(cfg, "instructions"))
    stoplist = _stoplist(cfg)

    if cfg.dry_run:
        calls = 0
        for r in recordings:
            if r.source_kind is SourceKind.NARRATED or cfg.annotation_path == "normalize":
                calls += 1
            else:
                calls += int(sum(not is_generic(a.description, stoplist) for a in r.steps) > 1)
        return {"recordings": len(recordings), "llm_calls": calls, "llm_calls_max": calls + sum(r.source_kind is SourceKind.NARRATED for r in recordings)}

    with _client(cfg.backend, cfg.cassette, "instructions", cfg, client) as llm:

        def one(r):
            kw = {"recording_id": r.recording_id, **_gen_kwargs(cfg)}
            if r.source_kind is SourceKind.NARRATED:
                return extract_from_narration(r.subtitles, r.task, llm, **kw)
            if cfg.annotation_path == "cluster":
                return cluster_and_filter_steps(r.steps, stoplist, llm, task=r.task, **kw)
            return normalize_annotated_steps(r.steps, llm, task=r.task, **kw)

        sets = _map_recordings(cfg, one, recordings, "instructions")
    atomic_write_text(cfg.file("instructions.jsonl"), dumps_jsonl(s.to_dict() for s in sets))
    return {"instruction_sets": len(sets), "steps": sum(len(s) for s in sets), "with_corrections": sum(s.has_corrections for s in sets)}


def session_plan(cfg, iset, recording):
    """(style, action_type) pairs to generate for one instruction set."""
    if iset.has_corrections:
        return [(SpeechStyle(cfg.error_style), ActionType.ERROR)] if cfg.error_mode else []
    styles = cfg.narrated_styles if recording.source_kind is SourceKind.NARRATED else cfg.annotated_styles
    return [(SpeechStyle(s), ActionType.FOLLOW) for s in styles]


def _planned_dialogues(cfg):
    """Dry-run estimate before any instruction set exists.

    Error recordings give one error session; caveats (and so clarification
    calls) can only come from narration.
    """
    recordings = _instruction_targets(cfg, _planning_recordings(cfg, "dialogues"))
    error = {r.recording_id for r in partition_recordings(recordings)[0]}
    n = clar = 0
    for r in recordings:
        if r.recording_id in error:
            n += 1
        else:
            k = len(cfg.narrated_styles if r.source_kind is SourceKind.NARRATED else cfg.annotated_styles)
            n += k
            clar += k if cfg.clarifications and r.source_kind is SourceKind.NARRATED else 0
    return {"conversations": n, "llm_calls": n, "llm_calls_max": 2 * n + clar}


def cmd_gen_dialogues(cfg, client=None):
    if cfg.dry_run and not cfg.file("instructions.jsonl").exists():
        return _planned_dialogues(cfg)
    recordings = {r.recording_id: r for r in _read_recordings(cfg, "dialogues")}
    sets = _read_instructions(cfg, "dialogues")
    jobs = [(iset, style, action) for iset in sets for style, action in session_plan(cfg, iset, recordings[iset.recording_id])]

    if cfg.dry_run:
        extra = sum(1 for iset, _, _ in jobs if cfg.clarifications and iset.has_caveats)
        return {"conversations": len(jobs), "llm_calls": len(jobs) + extra, "llm_calls_max": 2 * len(jobs) + extra}

    with _client(cfg.backend, cfg.cassette, "dialogues", cfg, client) as llm:

        def one(job):
            iset, style, action = job
            return generate(
                iset, style, action, llm, token=cfg.correction_token, clarifications=cfg.clarifications, **_gen_kwargs(cfg)
            )

        convs = _map_recordings(cfg, one, jobs, "dialogues")
    atomic_write_text(cfg.file("conversations.jsonl"), dumps_jsonl(c.to_dict() for c in convs))
    return {"conversations": len(convs), "turns": sum(len(c) for c in convs)}


def cmd_localize(cfg, client=None):
    recordings = {r.recording_id: r for r in _read_recordings(cfg, "localize")}
    maps = []
    for iset in _read_instructions(cfg, "localize"):
        rec = recordings[iset.recording_id]
        if rec.source_kind is SourceKind.NARRATED:
            m = loc.localize_from_subtitles(iset, rec.subtitles, rec.duration)
        else:
            m = loc.localize_direct(iset, rec.steps)
        for problem in m.problems(rec.duration):
            logger.warning("localize: %s: %s", rec.recording_id, problem)
        maps.append(m)
    loc.write_span_maps(maps, cfg.file("spans.csv"))
    return {"recordings": len(maps), "spans": sum(len(m) for m in maps)}


def cmd_assemble(cfg, client=None):
    sets = {s.recording_id: s for s in _read_instructions(cfg, "assemble")}
    convs = [Conversation.from_dict(d) for d in _read_lines(cfg.file("conversations.jsonl"), "assemble")]
    span_maps = loc.read_span_maps(_require(cfg.file("spans.csv"), "assemble"))
    sessions = []
    for conv in convs:
        rid = conv.source_recording_id
        if rid not in span_maps:
            raise StageInputMissing(f"assemble: no spans for {rid}")
        iset = sets[rid].with_spans(span_maps[rid].entries)
        sessions.append(ds.assemble(loc.attach_clips(conv, span_maps[rid]), iset, recording_id=rid))
    if not sessions:
        raise StageInputMissing("assemble: no conversations to assemble")
    ds.write_dataset(sessions, cfg.dataset_path)
    loc.emit_cutlist(sessions, cfg.run_path)
    return {"sessions": len(sessions), "clips": len(loc.cutlist_rows(sessions))}


def cmd_split(cfg, client=None):
    sessions = ds.read_dataset(_require(cfg.dataset_path, "split"))
    assignment = ds.stratified_split(sessions, cfg.ratios, cfg.seed)
    atomic_write_text(cfg.file("split.csv"), assignment.to_csv())
    ds.write_dataset(assignment.apply(sessions), cfg.dataset_path)
    return assignment.counts()


def cmd_stats(cfg, client=None):
    sessions = ds.read_dataset(_require(cfg.dataset_path, "stats"))
    report = ds.compute_stats(sessions)
    ds.write_stats_report(report, cfg.run_path / "reports" / "stats")
    return report.summary()


def _records_from_file(path):
    return [MetricRecord(**json.loads(line)) for line in jsonl_lines(Path(path).read_text(encoding="utf-8")) if line.strip()]


def _predictions_from_file(path):
    return [PredictedResponse.from_dict(json.loads(line)) for line in jsonl_lines(Path(path).read_text(encoding="utf-8")) if line.strip()]


def cmd_eval(cfg, client=None, judge_client=None):
    """Teacher-forced inference in each prompt mode, scoring, and the report tables."""
    sessions = ds.read_dataset(_require(cfg.dataset_path, "eval"))
    split = None if cfg.eval_split in ("", "all") else cfg.eval_split
    chosen = [s for s in sessions if split is None or s.split == split]
    if not chosen:
        raise StageInputMissing(f"eval: no sessions in split {cfg.eval_split!r}")
    out = cfg.eval_path
    n_turns = sum(len(s.conversation) for s in chosen)

    if cfg.dry_run:
        infer = 0 if cfg.predictions else n_turns * len(cfg.modes)
        judged = n_turns * len(cfg.modes) if cfg.judge else 0
        return {"sessions": len(chosen), "llm_calls": infer + judged, "llm_calls_max": infer + 2 * judged}

    eval_kind = cfg.eval_backend or cfg.backend
    judge_kind = cfg.judge_backend or cfg.backend
    if cfg.predictions:
        predictions, failures = _predictions_from_file(_require(cfg.predictions, "eval")), []
    else:
        if client is None and eval_kind == "replay" and not (cfg.eval_cassette and Path(cfg.eval_cassette).is_file()):
            raise StageInputMissing("eval: replay mode needs an eval cassette or an existing predictions file")
        predictions, failures = [], []
        with _client(eval_kind, cfg.eval_cassette, "eval", cfg, client) as llm:
            for mode in cfg.modes:
                run = run_inference(
                    chosen, mode, llm, model_id=cfg.eval_model, jobs=cfg.workers(network=eval_kind != "replay")
                )
                predictions.extend(run.predictions)
                failures.extend(run.errors)

    if cfg.judge:
        with _client(judge_kind, cfg.judge_cassette, "eval/judge", cfg, judge_client) as jc:
            records, judge_failures = score_predictions(
                chosen,
                predictions,
                jc,
                with_reference=cfg.judge_reference,
                judge_model=cfg.judge_model,
                jobs=cfg.workers(network=judge_kind != "replay"),
            )
    else:
        records, judge_failures = score_predictions(chosen, predictions)
    failures.extend(judge_failures)

    atomic_write_text(out / "predictions.jsonl", dumps_jsonl(p.to_dict() for p in predictions))
    atomic_write_text(out / "records.jsonl", dumps_jsonl(asdict(r) for r in records))
    atomic_write_text(out / "failures.jsonl", dumps_jsonl(f.to_dict() for f in failures))
    _write_eval_report(chosen, predictions, records, out)
    summary = {"sessions": len(chosen), "predictions": len(predictions), "failures": len(failures)}
    for mode, row in headline(chosen, predictions, records).items():
        summary[f"{mode}.corpus_bleu"] = round(row["corpus_bleu"], 6)
        summary[f"{mode}.rougeL"] = None if row["mean_rougeL"] is None else round(row["mean_rougeL"], 6)
        summary[f"{mode}.judge"] = None if row["mean_judge"] is None else round(row["mean_judge"], 6)
    return summary


def _write_eval_report(sessions, predictions, records, out):
    tables = aggregate(records, sessions)
    write_report(tables, records, out, headline(sessions, predictions, records))
    return tables


def cmd_report(cfg, client=None):
    """Rebuild the report tables and plots from a finished eval run."""
    out = cfg.eval_path
    records = _records_from_file(_require(out / "records.jsonl", "report"))
    predictions = _predictions_from_file(_require(out / "predictions.jsonl", "report"))
    sessions = ds.read_dataset(_require(cfg.dataset_path, "report"))
    wanted = {r.session_id for r in records}
    tables = _write_eval_report([s for s in sessions if s.session_id in wanted], predictions, records, out)
    return {name: len(t.rows) for name, t in tables.tables.items()}


COMMANDS = {
    "ingest": cmd_ingest,
    "instructions": cmd_build_instructions,
    "dialogues": cmd_gen_dialogues,
    "localize": cmd_localize,
    "assemble": cmd_assemble,
    "split": cmd_split,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "report": cmd_report,
}


def run_pipeline(cfg, client=None, stages=STAGES):
    """Run the generation stages in order; returns ``{stage: summary}``."""
    return {stage: COMMANDS[stage](cfg, client=client) for stage in stages}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="TOML file of configuration keys")
    p.add_argument("--jobs", type=int, help="worker threads (default: logical CPUs, capped for network stages)")
    p.add_argument("--dry-run", action="store_true", help="print planned LLM call counts and exit")
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--cassette", help="cassette file for the generation stages")
    p.add_argument("--seed", type=int)
    p.add_argument("--run-dir")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser():
    parser = _Parser(
        prog="vid2dialog",
        description="Build task dialogues from instructional videos and benchmark assistants on them.",
        epilog="Any configuration key can also be given as --key value (e.g. --error-mode false).",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()
    helps = {
        "ingest": "load the manifest and check recording timelines",
        "instructions": "form instruction sets from narration or annotations",
        "dialogues": "generate conversations from instruction sets",
        "localize": "compute step spans",
        "assemble": "bind conversations, instructions and spans into sessions",
        "split": "stratified train/val/test split",
        "stats": "corpus statistics report",
        "eval": "run the benchmark from a run manifest",
        "report": "rebuild report tables from an eval run",
        "run": "ingest through stats in one go",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _overrides(args, extra):
    out = {}
    if args.dry_run:
        out["dry_run"] = True
    for key in ("jobs", "backend", "cassette", "seed", "run_dir"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key, eq, value = tok[2:].partition("=")
        key = key.replace("-", "_")
        if not eq:
            if i + 1 >= len(extra):
                raise ConfigError(f"--{key} needs a value")
            value = extra[i + 1]
            i += 1
        if key not in _FIELDS:
            raise ConfigError(f"unknown option --{key.replace('_', '-')}")
        out[key] = _coerce(key, value)
        i += 1
    return out


def _print_summary(stage, summary):
    for key, value in summary.items():
        print(f"{stage}.{key} = {value}")


def main(argv=None):
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
        )
        cfg = load_config(args.config, _overrides(args, extra))
    except ConfigError as exc:
        print(f"vid2dialog: config error: {exc}", file=sys.stderr)
        return 1

    stages = STAGES if args.command == "run" else (args.command,)
    stage = stages[0]
    try:
        for stage in stages:
            if args.dry_run and stage in ("ingest", "localize", "assemble", "split", "stats", "report"):
                _print_summary(stage, {"llm_calls": 0})
                continue
            _print_summary(stage, COMMANDS[stage](cfg))
    except ConfigError as exc:
        print(f"vid2dialog: config error in {stage}: {exc}", file=sys.stderr)
        return 1
    except (Vid2DialogError, OSError, ValueError, KeyError) as exc:
        print(f"vid2dialog: {stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
