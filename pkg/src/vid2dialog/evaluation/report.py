"""Group-wise metric tables and their CSV/SVG rendering."""

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .._io import atomic_write_text
from .harness import METRICS

GROUPINGS = {
    "overall": ("mode",),
    "task": ("mode", "task"),
    "style_action": ("mode", "style", "action_type"),
    "turn_index": ("mode", "turn_index"),
}


@dataclass
class GroupRow:
    key: tuple
    means: dict
    counts: dict


@dataclass
class ReportTable:
    name: str
    key_names: tuple
    rows: list = field(default_factory=list)

    def row(self, *key):
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.key_names, *(f"{m}_mean" for m in METRICS), *(f"{m}_n" for m in METRICS)])
        for r in self.rows:
            means = ["" if r.means[m] is None else f"{r.means[m]:.6f}" for m in METRICS]
            w.writerow([*r.key, *means, *(r.counts[m] for m in METRICS)])
        return buf.getvalue()


@dataclass
class ReportTables:
    tables: dict

    def __getitem__(self, name):
        return self.tables[name]

    def __iter__(self):
        return iter(self.tables.values())


def _key_fields(record, session):
    return {
        "mode": record.mode,
        "task": session.task,
        "style": session.style.value,
        "action_type": session.action_type.value,
        "turn_index": record.turn_index,
    }


def _summarise(records):
    means, counts = {}, {}
    for m in METRICS:
        vals = [r.value(m) for r in records if r.value(m) is not None]
        counts[m] = len(vals)
        means[m] = math.fsum(vals) / len(vals) if vals else None
    return means, counts


def aggregate(records, sessions):
    """Mean and count of each metric overall, per task, per style x action and per turn index.

    Everything is keyed by prompt mode as well. The turn-index table has a
    row for every index from 1 to the largest seen, empty ones included.
    """
    by_id = {s.session_id: s for s in sessions}
    unknown = sorted({r.session_id for r in records} - set(by_id))
    if unknown:
        raise KeyError(f"records refer to unknown sessions: {unknown[:3]}")

    tables = {}
    for name, key_names in GROUPINGS.items():
        groups = defaultdict(list)
        for r in records:
            f = _key_fields(r, by_id[r.session_id])
            groups[tuple(f[k] for k in key_names)].append(r)
        if name == "turn_index":
            for mode in {k[0] for k in groups}:
                top = max(k[1] for k in groups if k[0] == mode)
                for i in range(1, top + 1):
                    groups.setdefault((mode, i), [])
        table = ReportTable(name, key_names)
        for key in sorted(groups):
            table.rows.append(GroupRow(key, *_summarise(groups[key])))
        tables[name] = table
    return ReportTables(tables)


def recomposition_error(tables, metric):
    """Largest gap between each table's count-weighted group mean and the overall mean, per mode."""
    overall = tables["overall"]
    worst = 0.0
    for orow in overall.rows:
        mode = orow.key[0]
        if orow.means[metric] is None:
            continue
        for t in tables:
            rows = [r for r in t.rows if r.key[0] == mode and r.counts[metric]]
            total = sum(r.counts[metric] for r in rows)
            weighted = math.fsum(r.means[metric] * r.counts[metric] for r in rows) / total
            worst = max(worst, abs(weighted - orow.means[metric]))
    return worst


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def metrics_csv(records):
    cols = ["session_id", "turn_index", "mode", "bleu", "rouge1", "rouge2", "rougeL", "judge",
            "rouge1_p", "rouge1_r", "rouge2_p", "rouge2_r", "rougeL_p", "rougeL_r"]
    rows = []
    for r in sorted(records, key=lambda r: r.key):
        rows.append([("" if getattr(r, c) is None else (f"{getattr(r, c):.6f}" if isinstance(getattr(r, c), float) else getattr(r, c))) for c in cols])
    return _csv(cols, rows)


def headline_csv(headline):
    cols = ["mode", "turns", "corpus_bleu", "mean_bleu", "mean_rouge1", "mean_rouge2", "mean_rougeL", "mean_judge"]
    rows = []
    for mode, h in sorted(headline.items()):
        rows.append([mode, h["turns"], *("" if h[c] is None else f"{h[c]:.6f}" for c in cols[2:])])
    return _csv(cols, rows)


def write_report(tables, records, out_dir, headline=None):
    """CSV per table, the per-turn metrics, and the turn-index / judge / category plots."""
    from ..plots import bar_svg, histogram_svg, line_svg

    out_dir = Path(out_dir)
    for t in tables:
        atomic_write_text(out_dir / f"by_{t.name}.csv", t.to_csv())
    atomic_write_text(out_dir / "metrics.csv", metrics_csv(records))
    if headline is not None:
        atomic_write_text(out_dir / "headline.csv", headline_csv(headline))

    turn_rows = tables["turn_index"].rows
    modes = sorted({r.key[0] for r in turn_rows})
    top = max((r.key[1] for r in turn_rows), default=0)
    xs = list(range(1, top + 1))
    for metric in ("rougeL", "bleu"):
        series = {}
        for mode in modes:
            got = {r.key[1]: r.means[metric] for r in turn_rows if r.key[0] == mode}
            series[mode] = [got.get(i) if got.get(i) is not None else float("nan") for i in xs]
        atomic_write_text(
            out_dir / f"turn_index_{metric}.svg",
            line_svg(xs, series, "turn index", metric, f"{metric} by dialogue turn"),
        )

    judged = {mode: [r.judge for r in records if r.mode == mode and r.judge is not None] for mode in modes}
    atomic_write_text(
        out_dir / "judge_scores.svg",
        histogram_svg(judged, "judge score", "judge score distribution", bins=[0.5, 1.5, 2.5, 3.5, 4.5, 5.5]),
    )

    cat_rows = tables["style_action"].rows
    labels = [f"{m}\n{s}-{a}" for (m, s, a) in (r.key for r in cat_rows)]
    values = [r.means["rougeL"] or 0.0 for r in cat_rows]
    atomic_write_text(out_dir / "style_action_rougeL.svg", bar_svg(labels, values, "mean rougeL", "rougeL by speech style and action"))
    return out_dir
