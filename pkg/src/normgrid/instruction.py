"""Template grammar for single-sentence instructions."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Action(str, Enum):
    FETCH = "fetch"
    UNLOCK = "unlock"
    PASS = "pass"
    OUT_OF_DOMAIN = "out_of_domain"


class ObjectKind(str, Enum):
    KEY = "key"
    DOOR = "door"
    GEM = "gem"


VERBS = {
    "pick up": Action.FETCH,
    "get": Action.FETCH,
    "grab": Action.FETCH,
    "collect": Action.FETCH,
    "fetch": Action.FETCH,
    "find": Action.FETCH,
    "pass": Action.PASS,
    "give": Action.PASS,
    "hand": Action.PASS,
    "bring": Action.PASS,
    "unlock": Action.UNLOCK,
    "open": Action.UNLOCK,
}

NOUNS = {
    "key": ObjectKind.KEY, "keys": ObjectKind.KEY,
    "door": ObjectKind.DOOR, "doors": ObjectKind.DOOR,
    "gem": ObjectKind.GEM, "gems": ObjectKind.GEM,
}

NUMBERS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10, "both": 2,
}

# Requested colors are not limited to what a grid can hold.
COLOR_WORDS = frozenset("""
    red yellow blue green purple orange black white pink brown gray grey
    violet cyan magenta gold golden silver teal indigo maroon turquoise
""".split())


@dataclass(frozen=True)
class SemanticInstruction:
    action: Action
    object_kind: Optional[ObjectKind] = None
    color: Optional[str] = None
    number: Optional[int] = None  # explicit count, e.g. "two blue keys"
    plural: bool = False
    raw: str = field(default="", compare=False)

    def __post_init__(self):
        if self.action is Action.OUT_OF_DOMAIN and self.object_kind is not None:
            raise ValueError("out-of-domain instructions reference no object")
        if self.number is not None and self.number < 1:
            raise ValueError("explicit count must be at least 1")

    @property
    def in_domain(self) -> bool:
        return self.action is not Action.OUT_OF_DOMAIN

    @property
    def count(self) -> str:
        """``"specified"``, ``"singular"`` or ``"plural"``."""
        if self.number is not None:
            return "specified"
        return "plural" if self.plural else "singular"


def _tokens(text: str) -> list[str]:
    return re.sub(r"[^a-z0-9]+", " ", text.lower()).split()


def _find_verb(tokens: list[str]) -> tuple[Optional[Action], int]:
    for i, tok in enumerate(tokens):
        pair = " ".join(tokens[i:i + 2])
        if pair in VERBS:
            return VERBS[pair], i + 2
        if tok in VERBS:
            return VERBS[tok], i + 1
    return None, -1


def parse_instruction(text: str) -> SemanticInstruction:
    tokens = _tokens(text)
    action, start = _find_verb(tokens)
    noun_at = next((i for i in range(max(start, 0), len(tokens))
                    if tokens[i] in NOUNS), None)
    if action is None or noun_at is None:
        return SemanticInstruction(Action.OUT_OF_DOMAIN, raw=text)
    phrase = tokens[start:noun_at]
    color = next((t for t in reversed(phrase) if t in COLOR_WORDS), None)
    number = None
    for tok in phrase:
        if tok in NUMBERS:
            number = NUMBERS[tok]
        elif tok.isdigit() and int(tok) > 0:
            number = int(tok)
    noun = tokens[noun_at]
    return SemanticInstruction(
        action=action,
        object_kind=NOUNS[noun],
        color=color,
        number=number,
        plural=noun.endswith("s"),
        raw=text,
    )
