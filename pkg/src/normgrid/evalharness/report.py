"""Aggregate records into the condition table, interpretation block and stats."""
from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..prompting import Condition
from .metrics import interpretation_accuracy, per_class_prf
from .stats import DegenerateSample, paired_stats

CONDITION_NAMES = {Condition.WITH_NORMS: "Norms",
                   Condition.WITHOUT_NORMS: "Without Norms"}

# (score key, column header, shown as percentage)
COLUMNS = [
    ("task", "Task", True),
    ("options_acc", "Options", True),
    ("length", "Mean Length", False),
    ("option_count", "Mean Options", False),
    ("relevancy", "Relevance", True),
    ("clarity", "Clarity", True),
]


@dataclass
class ConditionSummary:
    condition: Condition
    n: int
    failed: int
    parse_ok: int
    means: dict  # score key -> mean or None

    def to_json(self) -> dict:
        return {"condition": self.condition.value, "n": self.n,
                "failed": self.failed, "parse_ok": self.parse_ok,
                "means": self.means}


@dataclass
class MetricsReport:
    conditions: list
    per_class: dict = field(default_factory=dict)
    interpretation: Optional[float] = None
    interpretation_n: int = 0
    stats: dict = field(default_factory=dict)  # score key -> StatsResult or None
    by_construction: bool = False

    def to_json(self) -> dict:
        return {
            "conditions": [c.to_json() for c in self.conditions],
            "interpretation_accuracy": self.interpretation,
            "interpretation_n": self.interpretation_n,
            "per_class": {lab.value: {"precision": m.precision, "recall": m.recall,
                                      "f1": m.f1, "tp": m.tp, "fp": m.fp, "fn": m.fn}
                          for lab, m in self.per_class.items()},
            "paired_stats": {k: (v.to_json() if v else None)
                             for k, v in self.stats.items()},
            "ratings_by_construction": self.by_construction,
        }


def _mean(values: list) -> Optional[float]:
    values = [v for v in values if v is not None]
    return statistics.fmean(values) if values else None


def summarize(records: list) -> MetricsReport:
    if not records:
        raise ValueError("no records to summarize")
    conds = [c for c in Condition if any(r.condition is c for r in records)]
    summaries = []
    for c in conds:
        rs = [r for r in records if r.condition is c]
        ok = [r for r in rs if not r.failed]
        means = {key: _mean([r.scores.get(key) for r in ok]) for key, _, _ in COLUMNS}
        summaries.append(ConditionSummary(c, len(rs), len(rs) - len(ok),
                                          sum(r.parsed.parse_ok for r in ok), means))
    report = MetricsReport(summaries)
    report.by_construction = any(r.rating_source == "construction" for r in records)

    pairs = [(r.gold_label, r.parsed.norm_label) for r in records
             if r.condition is Condition.WITH_NORMS and not r.failed]
    report.per_class = per_class_prf(pairs)
    report.interpretation = interpretation_accuracy(pairs)
    report.interpretation_n = len(pairs)

    if len(conds) == 2:
        by_cond = {c: {r.instruction_id: r for r in records
                       if r.condition is c and not r.failed} for c in conds}
        common = sorted(set(by_cond[Condition.WITH_NORMS])
                        & set(by_cond[Condition.WITHOUT_NORMS]))
        for key, _, _ in COLUMNS:
            xs = [(by_cond[Condition.WITH_NORMS][i].scores.get(key),
                   by_cond[Condition.WITHOUT_NORMS][i].scores.get(key)) for i in common]
            xs = [(a, b) for a, b in xs if a is not None and b is not None]
            try:
                report.stats[key] = paired_stats(xs)
            except DegenerateSample:
                report.stats[key] = None
    return report


def _fmt(value: Optional[float], pct: bool) -> str:
    if value is None:
        return "n/a"
    return f"{100 * value:.2f}%" if pct else f"{value:.2f}"


def _fmt_p(p: float) -> str:
    return "p < 0.001" if p < 0.001 else f"p = {p:.3f}"


def render_text(report: MetricsReport) -> str:
    out = io.StringIO()
    w = out.write
    widths = [14] + [max(len(h), 9) for _, h, _ in COLUMNS]
    header = ["Experiment"] + [h for _, h, _ in COLUMNS]
    w("Performance by condition\n")
    w("  ".join(h.ljust(widths[0]) if i == 0 else h.rjust(widths[i])
                for i, h in enumerate(header)).rstrip() + "\n")
    for s in report.conditions:
        cells = [CONDITION_NAMES[s.condition].ljust(widths[0])]
        for i, (key, _, pct) in enumerate(COLUMNS, 1):
            cells.append(_fmt(s.means[key], pct).rjust(widths[i]))
        w("  ".join(cells).rstrip() + "\n")
    w("\n")
    for s in report.conditions:
        w(f"{CONDITION_NAMES[s.condition]}: {s.n} records, {s.failed} failed, "
          f"{s.parse_ok} well-formed replies\n")
    w("Task accuracy on Invalid/Irrelevant/Ambiguous instructions is the share "
      "of gold clarification options the reply offers.\n")
    w("Mean Options is averaged over Invalid/Irrelevant/Ambiguous instructions only.\n")
    if report.by_construction:
        w("Relevance and Clarity are 1.0 by construction for the oracle backend, "
          "not annotated.\n")
    else:
        w("Relevance and Clarity are means over annotated records; n/a when none "
          "were ingested.\n")

    w("\nInstruction interpretation (with norms)\n")
    if not report.per_class:
        w("no with-norms records\n")
    else:
        w(f"{'':20}  {'Precision':>9}  {'Recall':>9}  {'F1 Score':>9}  {'Support':>7}\n")
        for label, m in report.per_class.items():
            w(f"{label.value:20}  {m.precision:9.2f}  {m.recall:9.2f}  {m.f1:9.2f}  "
              f"{m.support:7d}\n")
        w(f"Accuracy: {_fmt(report.interpretation, True)} "
          f"of {report.interpretation_n} instructions\n")

    if report.stats:
        w("\nPaired t-tests (Norms minus Without Norms)\n")
        for key, header, _ in COLUMNS:
            st = report.stats.get(key)
            if st is None:
                w(f"{header:14}  n/a\n")
            else:
                w(f"{header:14}  t({st.df}) = {st.t:.2f}, {_fmt_p(st.p)}, "
                  f"d = {st.d:.2f}, n = {st.n}\n")
    return out.getvalue()


def render_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["condition", "n", "failed", "parse_ok"] + [k for k, _, _ in COLUMNS])
    for s in report.conditions:
        writer.writerow([s.condition.value, s.n, s.failed, s.parse_ok] +
                        ["" if s.means[k] is None else f"{s.means[k]:.6f}"
                         for k, _, _ in COLUMNS])
    return buf.getvalue()


def render_figure(report: MetricsReport, path: Union[str, Path]) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pct = [(k, h) for k, h, p in COLUMNS if p]
    raw = [(k, h) for k, h, p in COLUMNS if not p]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4),
                             gridspec_kw={"width_ratios": [2, 1]})
    width = 0.8 / max(len(report.conditions), 1)
    for panel, (ax, cols) in enumerate(zip(axes, (pct, raw))):
        for i, s in enumerate(report.conditions):
            vals = [s.means[k] if s.means[k] is not None else 0.0 for k, _ in cols]
            if panel == 0:
                vals = [100 * v for v in vals]
            xs = [j + i * width for j in range(len(cols))]
            ax.bar(xs, vals, width, label=CONDITION_NAMES[s.condition])
        ax.set_xticks([j + width * (len(report.conditions) - 1) / 2
                       for j in range(len(cols))])
        ax.set_xticklabels([h for _, h in cols])
    axes[0].set_ylabel("%")
    axes[0].set_ylim(0, 105)
    axes[0].legend(loc="lower right")
    axes[1].set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def write_report(records: list, out_dir: Union[str, Path],
                 figure: bool = True) -> dict:
    """Write report.txt, summary.csv, summary.json and summary.png."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = summarize(records)
    paths = {
        "text": out / "report.txt",
        "csv": out / "summary.csv",
        "json": out / "summary.json",
    }
    paths["text"].write_text(render_text(report))
    paths["csv"].write_text(render_csv(report))
    paths["json"].write_text(json.dumps(report.to_json(), indent=2, sort_keys=True)
                             + "\n")
    if figure:
        paths["figure"] = out / "summary.png"
        render_figure(report, paths["figure"])
    return paths
