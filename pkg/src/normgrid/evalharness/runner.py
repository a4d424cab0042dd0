"""Experiment runs: one record per (instruction, condition)."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Union

from ..agent import Backend, BackendError, OracleBackend, ParsedAgentReply, parse_reply
from ..corpus import Corpus, CorpusEntry
from ..norms import CLARIFY_LABELS, NormLabel
from ..prompting import Condition, PromptConfig, build_prompt
from .metrics import score_options, score_task

log = logging.getLogger(__name__)

RATING_SCALE = (0.0, 0.25, 0.5, 0.75, 1.0)


class BadRatingValue(ValueError):
    pass


@dataclass
class RunRecord:
    grid_id: str
    instruction_id: str
    condition: Condition
    gold_label: NormLabel
    digest: str = ""
    raw_reply: str = ""
    parsed: ParsedAgentReply = field(default_factory=ParsedAgentReply)
    scores: dict = field(default_factory=dict)
    rating_source: Optional[str] = None  # "construction" or "annotator"
    failed: bool = False
    error: str = ""

    @property
    def key(self) -> tuple:
        return (self.grid_id, self.instruction_id, self.condition.value)

    def to_json(self) -> dict:
        return {
            "grid_id": self.grid_id,
            "instruction_id": self.instruction_id,
            "condition": self.condition.value,
            "gold_label": self.gold_label.value,
            "digest": self.digest,
            "raw_reply": self.raw_reply,
            "parsed": self.parsed.to_json(),
            "scores": self.scores,
            "rating_source": self.rating_source,
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RunRecord":
        return cls(d["grid_id"], d["instruction_id"], Condition(d["condition"]),
                   NormLabel(d["gold_label"]), d.get("digest", ""),
                   d.get("raw_reply", ""),
                   ParsedAgentReply.from_json(d.get("parsed", {})),
                   dict(d.get("scores", {})), d.get("rating_source"),
                   bool(d.get("failed", False)), d.get("error", ""))


def save_records(records: Iterable[RunRecord], path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def load_records(path: Union[str, Path]) -> list:
    with open(path) as fh:
        return [RunRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def score_record(rec: RunRecord, entry: CorpusEntry, corpus: Corpus) -> dict:
    parsed, gold = rec.parsed, entry.gold
    clarify = gold.label in CLARIFY_LABELS
    return {
        "task": score_task(parsed, gold, corpus.grid_for(entry)),
        "options_acc": score_options(parsed, gold) if clarify else None,
        "length": len(parsed.response_text),
        "option_count": len(parsed.options) if clarify else None,
        "relevancy": None,
        "clarity": None,
    }


def _run_one(corpus: Corpus, entry: CorpusEntry, cfg: PromptConfig,
             backend: Backend) -> RunRecord:
    g = corpus.grid_for(entry)
    rec = RunRecord(entry.grid_id, entry.instruction_id, cfg.condition,
                    entry.gold.label)
    try:
        prompt = build_prompt(g, entry.text, cfg,
                              corpus.exemplars.get(cfg.condition.value, []))
        rec.digest = prompt.digest
        rec.raw_reply = backend.complete(prompt, cfg)
    except BackendError as exc:
        log.warning("%s/%s %s: %s", entry.grid_id, entry.instruction_id,
                    cfg.condition.value, exc)
        rec.failed = True
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec
    rec.parsed = parse_reply(rec.raw_reply, cfg.condition)
    rec.scores = score_record(rec, entry, corpus)
    if isinstance(backend, OracleBackend):
        rec.scores["relevancy"] = rec.scores["clarity"] = 1.0
        rec.rating_source = "construction"
    return rec


def run_experiment(corpus: Corpus, cfg: PromptConfig, backend: Backend,
                   conditions: Optional[Iterable[Condition]] = None,
                   parallelism: int = 1) -> list:
    """Evaluate every corpus entry under each condition.

    ``conditions`` defaults to both; ``cfg.condition`` is overridden per
    condition. Backend errors mark a record failed instead of stopping
    the run.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    conds = list(conditions) if conditions is not None else list(Condition)
    jobs = [(e, replace(cfg, condition=c)) for c in conds for e in corpus.entries]
    if parallelism == 1:
        records = [_run_one(corpus, e, c, backend) for e, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(lambda job: _run_one(corpus, *job, backend), jobs))
    return sorted(records, key=lambda r: r.key)


def _check_rating(value, where: str) -> Optional[float]:
    if value is None:
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise BadRatingValue(f"{where}: {value!r} is not a number") from None
    if not any(abs(v - s) < 1e-9 for s in RATING_SCALE):
        raise BadRatingValue(f"{where}: {value!r} is not on the 0.25-step scale")
    return v


def ingest_ratings(records: list, ratings: Union[str, Path, Iterable[dict]]) -> list:
    """Attach relevancy/clarity ratings keyed by (grid_id, instruction_id, condition)."""
    if isinstance(ratings, (str, Path)):
        with open(ratings) as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
    else:
        rows = list(ratings)
    table = {}
    for n, row in enumerate(rows, 1):
        where = f"rating {n}"
        try:
            key = (row["grid_id"], row["instruction_id"],
                   Condition(row["condition"]).value)
        except (KeyError, ValueError) as exc:
            raise BadRatingValue(f"{where}: bad key ({exc})") from None
        table[key] = (_check_rating(row.get("relevancy"), where),
                      _check_rating(row.get("clarity"), where))
    for rec in records:
        if rec.key in table and not rec.failed:
            rel, cla = table[rec.key]
            rec.scores["relevancy"], rec.scores["clarity"] = rel, cla
            rec.rating_source = "annotator"
    return records
