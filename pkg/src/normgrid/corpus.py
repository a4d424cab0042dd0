"""Bundled grids, gold-annotated instructions and few-shot exemplars.

Directory layout::

    <corpus>/grids/<grid_id>.txt
    <corpus>/instructions.jsonl
    <corpus>/exemplars/with_norms.jsonl
    <corpus>/exemplars/without_norms.jsonl

``load_corpus`` validates everything up front: each grid parses, each
gold plan simulates, each gold option names objects that exist, and
each gold label matches what ``classify`` says about the entry.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .grid import Color, Grid, GridError, Position, parse_grid, validate
from .instruction import parse_instruction
from .norms import (TYPE_TO_LABEL, ClarificationOption, InstructionType,
                    NormLabel, ObjectRef, classify)
from .planner import MoveAlong, PassKeys, PickUp, Plan, Unlock, simulate

TABLE3_DISTRIBUTION = {
    InstructionType.CLEAR: 20,
    InstructionType.INCOMPLETE: 5,
    InstructionType.INVALID: 11,
    InstructionType.IRRELEVANT: 6,
    InstructionType.AMBIGUOUS: 13,
}


class CorpusInvariantViolation(ValueError):
    pass


def default_corpus_dir() -> Path:
    return Path(str(resources.files("normgrid") / "data" / "corpus"))


# --------------------------------------------------------------------------
# json forms

def pos_to_json(p: Position) -> list:
    return [p.row, p.col]


def pos_from_json(v) -> Position:
    return Position(int(v[0]), int(v[1]))


def plan_to_json(plan: Plan) -> list:
    out = []
    for a in plan.actions:
        if isinstance(a, MoveAlong):
            out.append({"move": [pos_to_json(p) for p in a.path]})
        elif isinstance(a, PickUp):
            out.append({"pickup": pos_to_json(a.pos)})
        elif isinstance(a, PassKeys):
            out.append({"pass": [c.value for c in a.colors]})
        elif isinstance(a, Unlock):
            out.append({"unlock": pos_to_json(a.pos)})
    return out


def plan_from_json(data: list) -> Plan:
    actions = []
    for item in data:
        (kind, value), = item.items()
        if kind == "move":
            actions.append(MoveAlong(tuple(pos_from_json(p) for p in value)))
        elif kind == "pickup":
            actions.append(PickUp(pos_from_json(value)))
        elif kind == "pass":
            actions.append(PassKeys(tuple(Color(c) for c in value)))
        elif kind == "unlock":
            actions.append(Unlock(pos_from_json(value)))
        else:
            raise ValueError(f"unknown plan action {kind!r}")
    return Plan(tuple(actions))


def option_to_json(o: ClarificationOption) -> dict:
    return {
        "verb": o.verb,
        "obj": o.obj,
        "combined": o.combined,
        "refs": [{"kind": r.kind, "color": r.color,
                  "positions": [pos_to_json(p) for p in r.positions]}
                 for r in o.refs],
    }


def option_from_json(d: dict) -> ClarificationOption:
    refs = tuple(ObjectRef(r["kind"], r.get("color"),
                           tuple(pos_from_json(p) for p in r["positions"]))
                 for r in d.get("refs", []))
    return ClarificationOption(d["verb"], d["obj"], refs, d.get("combined", False))


# --------------------------------------------------------------------------
# entries

@dataclass
class GoldAnnotation:
    label: NormLabel
    gem: Optional[Position] = None
    plan: Optional[Plan] = None
    options: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "label": self.label.value,
            "gem": pos_to_json(self.gem) if self.gem else None,
            "plan": plan_to_json(self.plan) if self.plan is not None else None,
            "options": [option_to_json(o) for o in self.options],
        }

    @classmethod
    def from_json(cls, d: dict) -> "GoldAnnotation":
        return cls(
            NormLabel(d["label"]),
            pos_from_json(d["gem"]) if d.get("gem") else None,
            plan_from_json(d["plan"]) if d.get("plan") is not None else None,
            [option_from_json(o) for o in d.get("options", [])],
        )


@dataclass
class CorpusEntry:
    instruction_id: str
    grid_id: str
    text: str
    instruction_type: InstructionType
    gold: GoldAnnotation

    def to_json(self) -> dict:
        return {
            "instruction_id": self.instruction_id,
            "grid_id": self.grid_id,
            "text": self.text,
            "instruction_type": self.instruction_type.value,
            "gold": self.gold.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "CorpusEntry":
        return cls(d["instruction_id"], d["grid_id"], d["text"],
                   InstructionType(d["instruction_type"]),
                   GoldAnnotation.from_json(d["gold"]))


@dataclass
class Corpus:
    root: Path
    grids: dict
    entries: list
    exemplars: dict = field(default_factory=dict)  # Condition value -> list

    def grid_for(self, entry: CorpusEntry) -> Grid:
        return self.grids[entry.grid_id]

    def type_counts(self) -> dict:
        counts = Counter(e.instruction_type for e in self.entries)
        return {t: counts.get(t, 0) for t in InstructionType}


def load_grids(grid_dir: Union[str, Path]) -> dict:
    grids = {}
    for path in sorted(Path(grid_dir).glob("*.txt")):
        try:
            g = parse_grid(path.read_text(), id=path.stem)
        except GridError as exc:
            raise CorpusInvariantViolation(f"{path.name}: {exc}") from exc
        if g.id != path.stem:
            raise CorpusInvariantViolation(
                f"{path.name}: id line {g.id!r} does not match file name")
        grids[g.id] = g
    return grids


def read_jsonl(path: Union[str, Path]) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl(path: Union[str, Path], rows) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def check_entry(entry: CorpusEntry, g: Grid) -> None:
    """Raise ``CorpusInvariantViolation`` unless ``entry`` is consistent."""
    eid = entry.instruction_id
    gold = entry.gold
    want = TYPE_TO_LABEL[entry.instruction_type]
    if gold.label is not want:
        raise CorpusInvariantViolation(
            f"{eid}: type {entry.instruction_type.value} implies "
            f"{want.value}, gold says {gold.label.value}")
    label, _ = classify(g, parse_instruction(entry.text))
    if label is not gold.label:
        raise CorpusInvariantViolation(
            f"{eid}: gold label {gold.label.value} but classify() gives "
            f"{label.value}")
    if gold.plan is not None:
        sim = simulate(g, gold.plan)
        if not sim.ok:
            raise CorpusInvariantViolation(
                f"{eid}: gold plan fails at action {sim.failed_at}: {sim.reason}")
    for opt in gold.options:
        for ref in opt.refs:
            for p in ref.positions:
                if not g.in_bounds(p):
                    raise CorpusInvariantViolation(f"{eid}: option {p} off grid")
                cell = g.cell(p)
                if cell.kind.value != ref.kind or (
                        ref.color and (cell.color is None
                                       or cell.color.value != ref.color)):
                    raise CorpusInvariantViolation(
                        f"{eid}: option references {ref.color or ''} {ref.kind} "
                        f"at {p}, grid has {cell.kind.value}")


def load_corpus(root: Union[str, Path, None] = None,
                distribution: Optional[dict] = TABLE3_DISTRIBUTION,
                n_grids: Optional[int] = 25) -> Corpus:
    """Load and fully validate a corpus directory.

    ``distribution`` (instruction type -> count) and ``n_grids`` are
    enforced unless set to ``None``.
    """
    from .prompting import load_exemplars  # prompting imports corpus helpers

    root = Path(root) if root is not None else default_corpus_dir()
    grids = load_grids(root / "grids")
    for g in grids.values():
        try:
            validate(g)
        except GridError as exc:
            raise CorpusInvariantViolation(f"grid {g.id}: {exc}") from exc
    if n_grids is not None and len(grids) != n_grids:
        raise CorpusInvariantViolation(
            f"expected {n_grids} grids, found {len(grids)}")

    entries, seen = [], set()
    for row in read_jsonl(root / "instructions.jsonl"):
        try:
            entry = CorpusEntry.from_json(row)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusInvariantViolation(f"bad entry {row!r}: {exc}") from exc
        if entry.instruction_id in seen:
            raise CorpusInvariantViolation(
                f"duplicate instruction id {entry.instruction_id}")
        seen.add(entry.instruction_id)
        if entry.grid_id not in grids:
            raise CorpusInvariantViolation(
                f"{entry.instruction_id}: unknown grid {entry.grid_id!r}")
        check_entry(entry, grids[entry.grid_id])
        entries.append(entry)

    corpus = Corpus(root, grids, entries)
    if distribution is not None:
        counts = corpus.type_counts()
        want = {t: distribution.get(t, 0) for t in InstructionType}
        if counts != want:
            got = ", ".join(f"{t.value}={n}" for t, n in counts.items())
            raise CorpusInvariantViolation(
                f"instruction types {got} differ from expected distribution")

    ex_dir = root / "exemplars"
    if ex_dir.is_dir():
        for path in sorted(ex_dir.glob("*.jsonl")):
            corpus.exemplars[path.stem] = load_exemplars(path, grids)
    return corpus
