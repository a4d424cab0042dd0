"""Rule-based norm-violation classifier and response generator.

``classify`` applies the four conversational norms in a fixed order
(relation, quality, manner, quantity) and returns the first violation.
``infer_response`` turns the verdict into either an executable plan
(clear and incomplete instructions) or a set of clarification options
(invalid, irrelevant and ambiguous ones).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .grid import COLORS, Cell, CellKind, Color, Grid, Position, locate
from .instruction import Action, ObjectKind, SemanticInstruction
from .planner import (CannotReach, GemAnalysis, Plan, PlanError,
                      agent_fetch_plan, agent_unlock_plan, analyze_gem)


class NormLabel(str, Enum):
    NO_VIOLATION = "No Violation"
    QUANTITY = "Quantity Violation"
    QUALITY = "Quality Violation"
    RELATION = "Relation Violation"
    MANNER = "Manner Violation"


class InstructionType(str, Enum):
    CLEAR = "Clear"
    INCOMPLETE = "Incomplete"
    INVALID = "Invalid"
    IRRELEVANT = "Irrelevant"
    AMBIGUOUS = "Ambiguous"


TYPE_TO_LABEL = {
    InstructionType.CLEAR: NormLabel.NO_VIOLATION,
    InstructionType.INCOMPLETE: NormLabel.QUANTITY,
    InstructionType.INVALID: NormLabel.QUALITY,
    InstructionType.IRRELEVANT: NormLabel.RELATION,
    InstructionType.AMBIGUOUS: NormLabel.MANNER,
}
LABEL_TO_TYPE = {v: k for k, v in TYPE_TO_LABEL.items()}

PLAN_LABELS = frozenset({NormLabel.NO_VIOLATION, NormLabel.QUANTITY})
CLARIFY_LABELS = frozenset(NormLabel) - PLAN_LABELS


class NoGemOnGrid(ValueError):
    pass


@dataclass(frozen=True)
class ObjectRef:
    kind: str  # "key", "door" or "gem"
    color: Optional[str]
    positions: tuple = ()


@dataclass(frozen=True)
class ClarificationOption:
    verb: str
    obj: str
    refs: tuple = ()
    combined: bool = False

    @property
    def description(self) -> str:
        return f"{self.verb} {self.obj}"

    @property
    def positions(self) -> frozenset:
        return frozenset(p for r in self.refs for p in r.positions)


@dataclass
class Evidence:
    rule: str
    detail: str
    candidates: list = field(default_factory=list)
    inferred: Optional[GemAnalysis] = None


@dataclass
class OracleResponse:
    label: NormLabel
    instruction: SemanticInstruction
    grid: Grid = field(repr=False, compare=False)
    evidence: Evidence = field(repr=False)
    inferred_gem: Optional[Position] = None
    plan: Optional[Plan] = None
    options: list = field(default_factory=list)
    nl_text: str = ""
    blocked: str = ""  # set when the plan could not be executed

    @property
    def rationale(self) -> str:
        return self.evidence.detail


# --------------------------------------------------------------------------
# wording helpers

_NUMBER_WORDS = ["zero", "one", "two", "three", "four", "five", "six",
                 "seven", "eight", "nine", "ten"]


def number_word(n: int) -> str:
    return _NUMBER_WORDS[n] if 0 <= n < len(_NUMBER_WORDS) else str(n)


def join_words(items: list, conj: str = "and") -> str:
    if len(items) <= 1:
        return "".join(items)
    if len(items) == 2:
        return f"{items[0]} {conj} {items[1]}"
    return ", ".join(items[:-1]) + f", {conj} {items[-1]}"


def _counted(n: int, noun: str) -> str:
    return f"{number_word(n)} {noun}{'' if n == 1 else 's'}"


def describe_keys(keys: Counter) -> str:
    parts = [_counted(keys[c], f"{c.value} key") for c in COLORS if keys.get(c)]
    return join_words(parts) or "no keys"


def _requested(s: SemanticInstruction) -> str:
    noun = s.object_kind.value
    color = f"{s.color} " if s.color else ""
    if s.number is not None:
        return _counted(s.number, f"{color}{noun}")
    return f"{color}{noun}{'s' if s.plural else ''}"


def _color(word: Optional[str]) -> Optional[Color]:
    try:
        return Color(word)
    except ValueError:
        return None


def _matching(g: Grid, kind: ObjectKind, color: Optional[str]) -> list:
    if kind is ObjectKind.GEM:
        return [] if color else locate(g, CellKind.GEM)
    cell_kind = CellKind.KEY if kind is ObjectKind.KEY else CellKind.DOOR
    if color is None:
        return locate(g, cell_kind)
    c = _color(color)
    return locate(g, Cell(cell_kind, c)) if c else []


def _uses_color(g: Grid, a: GemAnalysis, color: Optional[str],
                kind: ObjectKind) -> bool:
    if kind is ObjectKind.GEM:
        return True
    if color is None:
        return bool(+a.required_keys)
    return any(g.cell(d).color.value == color for d in a.blocking_doors)


# --------------------------------------------------------------------------
# classification

def classify(g: Grid, s: SemanticInstruction) -> tuple[NormLabel, Evidence]:
    gems = locate(g, CellKind.GEM)
    if not gems:
        raise NoGemOnGrid(f"grid {g.id or '<anonymous>'} has no gem")

    if not s.in_domain:
        return NormLabel.RELATION, Evidence(
            "relation:out_of_domain",
            "The instruction is unrelated to collecting keys or unlocking "
            "doors, making it an irrelevant instruction.")

    what = _requested(s)
    present = _matching(g, s.object_kind, s.color)
    if not present:
        return NormLabel.QUALITY, Evidence(
            "quality:absent",
            f"There is no {_requested(_singular(s))} on the grid, making "
            "this an invalid instruction.")
    if s.number is not None and s.number > len(present):
        return NormLabel.QUALITY, Evidence(
            "quality:count",
            f"The instruction asks for {what}, but the grid has only "
            f"{number_word(len(present))}, making this an invalid instruction.")

    human = g.human
    analyses = [analyze_gem(g, human, gem) for gem in gems]
    candidates = [a for a in analyses if a.reachable
                  and _uses_color(g, a, s.color, s.object_kind)]
    if not candidates:
        return NormLabel.RELATION, Evidence(
            "relation:no_goal",
            f"No reachable gem on the grid needs the {_requested(_singular(s))}, "
            "so the instruction does not help the human collect a gem.")

    best = min(a.human_cost for a in candidates)
    tied = [a for a in candidates if a.human_cost == best]
    if len(tied) > 1:
        where = join_words([str(a.gem) for a in tied])
        return NormLabel.MANNER, Evidence(
            "manner:tied_goals",
            f"The gems at {where} are equally close to the human and fit the "
            "instruction, so it is unclear which gem the human wants, making "
            "this instruction ambiguous.", candidates, None)

    goal = tied[0]
    need = +goal.required_keys
    lead = (f"I infer that the human wants the gem at {goal.gem}, which needs "
            f"{describe_keys(need)}")
    if s.object_kind is ObjectKind.GEM:
        if need:
            return NormLabel.QUANTITY, Evidence(
                "quantity:missing_keys",
                f"{lead}, but the instruction does not mention any key, "
                "resulting in a Quantity Violation.", candidates, goal)
    elif s.color is None or _color(s.color) is None:
        return NormLabel.QUANTITY, Evidence(
            "quantity:missing_color",
            f"{lead}, but the instruction does not say which color, "
            "resulting in a Quantity Violation.", candidates, goal)
    else:
        color = _color(s.color)
        others = [c for c in need if c is not color]
        have = need[color]
        if others:
            missing = join_words([f"{c.value} {s.object_kind.value}" for c in others])
            return NormLabel.QUANTITY, Evidence(
                "quantity:missing_color",
                f"{lead}, but the instruction does not mention the {missing}, "
                "resulting in a Quantity Violation.", candidates, goal)
        asked = s.number if s.number is not None else (None if s.plural else 1)
        if asked is None and have > 1:
            return NormLabel.QUANTITY, Evidence(
                "quantity:unspecified_plural",
                f"{lead}, but the instruction does not say how many, "
                "resulting in a Quantity Violation.", candidates, goal)
        if asked is not None and asked < have:
            return NormLabel.QUANTITY, Evidence(
                "quantity:count",
                f"{lead}, but the instruction asks for {what}, resulting in "
                "a Quantity Violation.", candidates, goal)
    return NormLabel.NO_VIOLATION, Evidence(
        "no_violation",
        f"The instruction is clear, truthful, relevant, and unambiguous. "
        f"{lead}, and the instruction covers it.", candidates, goal)


def _singular(s: SemanticInstruction) -> SemanticInstruction:
    return SemanticInstruction(s.action, s.object_kind, s.color, None, False, s.raw)


# --------------------------------------------------------------------------
# responses

def _combined(options: list) -> ClarificationOption:
    verbs = {o.verb for o in options}
    verb = verbs.pop() if len(verbs) == 1 else "do"
    refs = tuple(r for o in options for r in o.refs)
    return ClarificationOption(verb, "both" if len(options) == 2 else "all of them",
                               refs, combined=True)


def _with_combined(options: list) -> list:
    return options + [_combined(options)] if len(options) >= 2 else options


def _alternative_options(g: Grid) -> list:
    """Valid key choices, widened to doors and then gems on sparse grids."""
    options = []
    for color in COLORS:
        keys = locate(g, Cell(CellKind.KEY, color))
        if keys:
            article = "the" if len(keys) == 1 else "a"
            options.append(ClarificationOption(
                "collect", f"{article} {color.value} key",
                (ObjectRef("key", color.value, tuple(keys)),)))
    if len(options) < 2:
        for color in COLORS:
            doors = locate(g, Cell(CellKind.DOOR, color))
            if doors and color in {Color(o.refs[0].color) for o in options}:
                article = "the" if len(doors) == 1 else "a"
                options.append(ClarificationOption(
                    "unlock", f"{article} {color.value} door",
                    (ObjectRef("door", color.value, tuple(doors)),)))
    if len(options) < 2:
        for gem in locate(g, CellKind.GEM):
            options.append(ClarificationOption(
                "help you reach", f"the gem at {gem}",
                (ObjectRef("gem", None, (gem,)),)))
    return _with_combined(options)


def _goal_options(g: Grid, tied: list) -> list:
    options = []
    for a in tied:
        refs = [ObjectRef("gem", None, (a.gem,))]
        for d in a.blocking_doors:
            refs.append(ObjectRef("door", g.cell(d).color.value, (d,)))
        # keys that would open this route count as naming the same goal
        for color in COLORS:
            if a.required_keys.get(color):
                keys = locate(g, Cell(CellKind.KEY, color))
                if keys:
                    refs.append(ObjectRef("key", color.value, tuple(keys)))
        options.append(ClarificationOption(
            "help you reach", f"the gem at {a.gem}", tuple(refs)))
    return _with_combined(options)


def infer_response(g: Grid, s: SemanticInstruction,
                   label: Optional[NormLabel] = None,
                   evidence: Optional[Evidence] = None) -> OracleResponse:
    """Plan or clarification options for ``s`` under verdict ``label``."""
    if label is None or evidence is None:
        label, evidence = classify(g, s)
    r = OracleResponse(label, s, g, evidence)
    if label in PLAN_LABELS:
        goal = evidence.inferred
        if goal is None:
            raise ValueError(f"{label.value} needs an inferred gem")
        r.inferred_gem = goal.gem
        try:
            if s.action is Action.UNLOCK:
                r.plan = agent_unlock_plan(g, goal.blocking_doors)
            else:
                r.plan = agent_fetch_plan(g, goal.required_keys)
        except (CannotReach, PlanError) as exc:
            r.blocked = str(exc)
    elif label is NormLabel.MANNER:
        best = min(a.human_cost for a in evidence.candidates)
        tied = [a for a in evidence.candidates if a.human_cost == best]
        r.options = _goal_options(g, tied)
    else:
        r.options = _alternative_options(g)
    r.nl_text = render_nl(r)
    return r


def respond(g: Grid, s: SemanticInstruction) -> OracleResponse:
    return infer_response(g, s, *classify(g, s))


# --------------------------------------------------------------------------
# natural-language rendering

def inventory_sentence(g: Grid) -> str:
    parts = []
    for kind in (CellKind.KEY, CellKind.DOOR):
        for color in COLORS:
            n = len(locate(g, Cell(kind, color)))
            if n:
                parts.append((n, _counted(n, f"{color.value} {kind.value}")))
    if not parts:
        return "There are no keys or doors on the grid."
    verb = "is" if parts[0][0] == 1 else "are"
    return f"There {verb} {join_words([p for _, p in parts])} on the grid."


def _thing_at(g: Grid, pos: Position) -> str:
    cell = g.cell(pos)
    return f"the {cell.color.value} {cell.kind.value} at {pos}"


def _question(options: list) -> str:
    verbs = {o.verb for o in options if not o.combined}
    if len(verbs) == 1:
        verb = verbs.pop()
        parts = [o.obj for o in options]
        return f"Do you want me to {verb} {join_words(parts, 'or')}?"
    return f"Do you want me to {join_words([o.description for o in options], 'or')}?"


def _plan_sentences(r: OracleResponse) -> list:
    g, plan = r.grid, r.plan
    doors = r.evidence.inferred.blocking_doors
    out = []
    if doors:
        verb = "needs" if len(doors) == 1 else "need"
        out.append(f"To collect the gem at {r.inferred_gem}, "
                   f"{join_words([_thing_at(g, d) for d in doors])} {verb} "
                   "to be unlocked.")
    else:
        out.append(f"The gem at {r.inferred_gem} can be reached without "
                   "unlocking any door.")
    if r.blocked:
        out.append("I cannot complete this because my path is blocked. "
                   "Please tell me how you would like me to proceed.")
        return out
    keys = [_thing_at(g, p) for p in plan.pickups]
    if not keys:
        out.append("No keys are needed, so you can go straight to the gem.")
    elif plan.unlocks:
        opened = join_words([_thing_at(g, d) for d in plan.unlocks])
        out.append(f"I will collect {join_words(keys)}, then unlock {opened}.")
    else:
        it = "it" if len(keys) == 1 else "them"
        out.append(f"I will collect {join_words(keys)}, then pass {it} to you "
                   "to unlock the door" + ("" if len(doors) == 1 else "s") + ".")
    return out


def render_nl(r: OracleResponse) -> str:
    """Inventory sentence, inference sentence, then the action or question."""
    g, s, rule = r.grid, r.instruction, r.evidence.rule
    sentences = [inventory_sentence(g)]
    if r.label in PLAN_LABELS:
        sentences += _plan_sentences(r)
    elif rule == "relation:out_of_domain":
        sentences.append("This instruction is not relevant to the grid, which "
                         "contains doors, keys, and gems.")
    elif rule == "relation:no_goal":
        sentences.append(f"The {_requested(_singular(s))} does not help you "
                         "reach any gem.")
    elif rule == "quality:absent":
        sentences.append(f"There is no {_requested(_singular(s))} on the grid.")
    elif rule == "quality:count":
        n = len(_matching(g, s.object_kind, s.color))
        noun = " ".join(filter(None, [s.color, s.object_kind.value]))
        sentences.append(f"There {'is' if n == 1 else 'are'} only "
                         f"{_counted(n, noun)} "
                         "on the grid.")
    elif r.label is NormLabel.MANNER:
        sentences.append("It is unclear which gem you want to collect.")
    if r.options:
        sentences.append(_question(r.options))
    return " ".join(sentences)
