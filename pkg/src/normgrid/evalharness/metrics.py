"""Per-reply scores and per-class interpretation metrics."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from ..agent import ParsedAgentReply
from ..corpus import GoldAnnotation
from ..grid import CellKind, Grid, Position
from ..instruction import COLOR_WORDS
from ..norms import NormLabel
from ..planner import PassKeys, PickUp, Plan, Unlock

_PASS_RE = re.compile(r"\b(pass|give|hand)\w*", re.I)
_KIND_RE = re.compile(r"\b(key|door|gem)s?\b")
_COMBINED_RE = re.compile(r"\b(both|all)\b")
_COORD_RE = re.compile(r"\((\d+)\s*,\s*(\d+)\)")


# --------------------------------------------------------------------------
# task accuracy

def plan_atoms(plan: Plan) -> Counter:
    """Order-free action atoms; each passed key is its own atom."""
    atoms = Counter()
    passed = Counter()
    for a in plan.actions:
        if isinstance(a, PickUp):
            atoms[("pickup", a.pos)] += 1
        elif isinstance(a, Unlock):
            atoms[("unlock", a.pos)] += 1
        elif isinstance(a, PassKeys):
            for c in a.colors:
                atoms[("pass", c.value, passed[c.value])] += 1
                passed[c.value] += 1
    return atoms


def predicted_atoms(parsed: ParsedAgentReply, g: Grid) -> Counter:
    """Atoms implied by the coordinates a reply mentions."""
    atoms = Counter()
    passed = Counter()
    picked = []
    for p in dict.fromkeys(parsed.coords):
        if not g.in_bounds(p):
            continue
        cell = g.cell(p)
        if cell.kind is CellKind.KEY:
            atoms[("pickup", p)] += 1
            picked.append(cell.color.value)
        elif cell.kind is CellKind.DOOR:
            atoms[("unlock", p)] += 1
    if picked and _PASS_RE.search(parsed.response_text):
        for color in picked:
            atoms[("pass", color, passed[color])] += 1
            passed[color] += 1
    return atoms


def score_task(parsed: ParsedAgentReply, gold: GoldAnnotation, g: Grid) -> float:
    if gold.plan is None:
        if not gold.options:
            return 0.0
        return _option_recall(parsed, gold)
    want = plan_atoms(gold.plan)
    got = predicted_atoms(parsed, g)
    if not want:
        # nothing to fetch: credit a reply that does not invent key actions
        return 0.0 if any(k[0] != "unlock" for k in got) else 1.0
    return sum((want & got).values()) / sum(want.values())


# --------------------------------------------------------------------------
# options

@dataclass
class _Mention:
    combined: bool
    kind: Optional[str]
    color: Optional[str]
    coords: frozenset

    @property
    def empty(self) -> bool:
        return not (self.combined or self.kind or self.color or self.coords)


def _mentions(options: Iterable[str]) -> list:
    out, prev = [], None
    for text in options:
        low = text.lower()
        coords = frozenset(Position(int(r), int(c)) for r, c in _COORD_RE.findall(low))
        m = _KIND_RE.search(low)
        kind = m.group(1) if m else None
        color = next((w for w in re.findall(r"[a-z]+", low) if w in COLOR_WORDS), None)
        combined = bool(_COMBINED_RE.search(low)) and not coords and color is None
        if kind is None and prev is not None and not combined:
            # "(4,6)" after "the yellow key at (0,4)" names another yellow key
            kind, color = prev.kind, color or prev.color
        cur = _Mention(combined, kind, color, coords)
        out.append(cur)
        prev = cur
    return out


def _matches(m: _Mention, opt) -> bool:
    if m.empty:
        return False
    if m.combined:
        return opt.combined
    if opt.combined:
        return False
    for ref in opt.refs:
        if m.kind is not None and m.kind != ref.kind:
            continue
        if m.color is not None and m.color != ref.color:
            continue
        if m.coords <= frozenset(ref.positions):
            return True
    return False


def _option_recall(parsed: ParsedAgentReply, gold: GoldAnnotation) -> float:
    mentions = _mentions(parsed.options)
    hit = sum(1 for o in gold.options if any(_matches(m, o) for m in mentions))
    return hit / len(gold.options)


def score_options(parsed: ParsedAgentReply, gold: GoldAnnotation) -> Optional[float]:
    """Share of presented options that name a valid interpretation.

    ``None`` for plan-type gold labels.
    """
    if not gold.options:
        return None
    mentions = _mentions(parsed.options)
    if not mentions:
        return 0.0
    good = sum(1 for m in mentions if any(_matches(m, o) for o in gold.options))
    return good / len(mentions)


# --------------------------------------------------------------------------
# interpretation accuracy

@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def per_class_prf(pairs: Iterable[tuple]) -> dict:
    """``pairs`` of (gold label, predicted label or None) -> {label: ClassMetrics}.

    Only labels that occur as gold or prediction are reported; order
    follows the NormLabel enum.
    """
    pairs = list(pairs)
    tp, fp, fn = Counter(), Counter(), Counter()
    for gold, pred in pairs:
        if pred is gold:
            tp[gold] += 1
        else:
            fn[gold] += 1
            if pred is not None:
                fp[pred] += 1
    out = {}
    for label in NormLabel:
        if not (tp[label] or fp[label] or fn[label]):
            continue
        p = tp[label] / (tp[label] + fp[label]) if tp[label] + fp[label] else 0.0
        r = tp[label] / (tp[label] + fn[label]) if tp[label] + fn[label] else 0.0
        out[label] = ClassMetrics(p, r, f1_score(p, r), tp[label], fp[label], fn[label])
    return out


def interpretation_accuracy(pairs: Iterable[tuple]) -> Optional[float]:
    pairs = list(pairs)
    if not pairs:
        return None
    return sum(1 for g, p in pairs if g is p) / len(pairs)
