"""Doors, Keys and Gems gridworld: parsing, rendering and textual description.

A grid is a rectangular block of single-character cells::

    r . . . m W W g      r/y/b  key (red, yellow, blue)
    y . W W . W W .      R/Y/B  door
                         g gem, W wall, . empty, m agent, h human

Grids are immutable values; every operation here is pure.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Optional, Union


class Color(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    BLUE = "blue"

    @property
    def title(self) -> str:
        return self.value.capitalize()


# canonical order used for listings and option enumeration
COLORS = (Color.RED, Color.YELLOW, Color.BLUE)


class CellKind(str, Enum):
    WALL = "wall"
    EMPTY = "empty"
    KEY = "key"
    DOOR = "door"
    GEM = "gem"
    HUMAN = "human"
    AGENT = "agent"


class Position(NamedTuple):
    row: int
    col: int

    def __str__(self) -> str:
        return f"({self.row}, {self.col})"

    def neighbors(self) -> Iterator["Position"]:
        # up, down, left, right: the tie-break order for every search
        r, c = self
        yield Position(r - 1, c)
        yield Position(r + 1, c)
        yield Position(r, c - 1)
        yield Position(r, c + 1)

    def adjacent(self, other: "Position") -> bool:
        return abs(self.row - other.row) + abs(self.col - other.col) == 1


class Cell(NamedTuple):
    kind: CellKind
    color: Optional[Color] = None

    @property
    def char(self) -> str:
        return _CELL_TO_CHAR[self]


_CHAR_TO_CELL = {
    "W": Cell(CellKind.WALL),
    ".": Cell(CellKind.EMPTY),
    "g": Cell(CellKind.GEM),
    "h": Cell(CellKind.HUMAN),
    "m": Cell(CellKind.AGENT),
    "r": Cell(CellKind.KEY, Color.RED),
    "y": Cell(CellKind.KEY, Color.YELLOW),
    "b": Cell(CellKind.KEY, Color.BLUE),
    "R": Cell(CellKind.DOOR, Color.RED),
    "Y": Cell(CellKind.DOOR, Color.YELLOW),
    "B": Cell(CellKind.DOOR, Color.BLUE),
}
_CELL_TO_CHAR = {cell: ch for ch, cell in _CHAR_TO_CELL.items()}


def key_char(color: Color) -> str:
    return Cell(CellKind.KEY, color).char


def door_char(color: Color) -> str:
    return Cell(CellKind.DOOR, color).char


class GridError(ValueError):
    """Base class for malformed grid documents."""


class UnknownCharacter(GridError):
    def __init__(self, pos: Position, char: str):
        super().__init__(f"unknown cell character {char!r} at {pos}")
        self.pos = pos
        self.char = char


class NonRectangular(GridError):
    pass


class MissingHuman(GridError):
    pass


class MissingAgent(GridError):
    pass


class DuplicateHuman(GridError):
    pass


class DuplicateAgent(GridError):
    pass


class MissingGem(GridError):
    pass


@dataclass(frozen=True)
class Grid:
    """Immutable cell matrix. ``rows`` holds one string per grid row."""

    rows: tuple[str, ...]
    id: str = field(default="", compare=False)

    def __post_init__(self):
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows or not rows[0]:
            raise NonRectangular("grid has no cells")
        width = len(rows[0])
        for r, line in enumerate(rows):
            if len(line) != width:
                raise NonRectangular(
                    f"row {r} has {len(line)} cells, expected {width}")
            for c, ch in enumerate(line):
                if ch not in _CHAR_TO_CELL:
                    raise UnknownCharacter(Position(r, c), ch)

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.rows[0])

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos.row < self.height and 0 <= pos.col < self.width

    def char(self, pos: Position) -> str:
        return self.rows[pos.row][pos.col]

    def cell(self, pos: Position) -> Cell:
        return _CHAR_TO_CELL[self.rows[pos.row][pos.col]]

    def positions(self) -> Iterator[Position]:
        for r in range(self.height):
            for c in range(self.width):
                yield Position(r, c)

    @property
    def agent(self) -> Position:
        return _single(self, "m", MissingAgent, DuplicateAgent)

    @property
    def human(self) -> Position:
        return _single(self, "h", MissingHuman, DuplicateHuman)

    def replace(self, changes: dict[Position, str]) -> "Grid":
        """Return a copy with the given cells overwritten."""
        rows = [list(line) for line in self.rows]
        for pos, ch in changes.items():
            rows[pos.row][pos.col] = ch
        return Grid(tuple("".join(line) for line in rows), id=self.id)


def _single(g: Grid, ch: str, missing, duplicate) -> Position:
    found = locate(g, ch)
    if not found:
        raise missing(f"grid {g.id or '<anonymous>'} has no {ch!r} cell")
    if len(found) > 1:
        raise duplicate(
            f"grid {g.id or '<anonymous>'} has {len(found)} {ch!r} cells: "
            + ", ".join(map(str, found)))
    return found[0]


Selector = Union[str, Cell, CellKind]


def locate(g: Grid, selector: Selector) -> list[Position]:
    """Row-major positions of every cell matching ``selector``.

    A selector is a cell character (``"Y"``), a full ``Cell`` or a bare
    ``CellKind`` (matching every color of that kind).
    """
    if isinstance(selector, CellKind):
        match = lambda ch: _CHAR_TO_CELL[ch].kind == selector  # noqa: E731
    else:
        target = selector if isinstance(selector, str) else selector.char
        match = lambda ch: ch == target  # noqa: E731
    return [Position(r, c)
            for r, line in enumerate(g.rows)
            for c, ch in enumerate(line) if match(ch)]


_ID_LINE = re.compile(r"^\s*#\s*id:\s*(.*?)\s*$")
_QUOTED = re.compile(r"'(.)'")


def parse_grid(text: str, id: str = "") -> Grid:
    """Parse a grid document.

    Accepts plain rows (whitespace between cells is ignored) or the
    bracketed matrix form produced by ``render_matrix``. An optional
    ``# id: <name>`` line sets the grid id; other ``#`` lines are skipped.
    Exactly one human and one agent are required.
    """
    rows = []
    for line in text.splitlines():
        m = _ID_LINE.match(line)
        if m:
            id = id or m.group(1)
            continue
        if line.lstrip().startswith("#"):
            continue
        if "[" in line:
            cells = _QUOTED.findall(line)
            if cells:
                rows.append("".join(cells))
            continue
        stripped = "".join(line.split())
        if stripped:
            rows.append(stripped)
    g = Grid(tuple(rows), id=id)
    g.human
    g.agent
    return g


def render_grid(g: Grid) -> str:
    return "\n".join(g.rows)


def render_matrix(g: Grid) -> str:
    """Bracketed character matrix, the layout shown to language models."""
    lines = ["[" + " ".join(f"'{ch}'" for ch in row) + "]" for row in g.rows]
    return "[" + "\n ".join(lines) + "]"


def to_file_text(g: Grid) -> str:
    head = f"# id: {g.id}\n" if g.id else ""
    return head + render_grid(g) + "\n"


def validate(g: Grid) -> None:
    """Full-game checks that ``Grid`` itself does not enforce."""
    g.human
    g.agent
    if not locate(g, "g"):
        raise MissingGem(f"grid {g.id or '<anonymous>'} has no gem")


def _listing(label: str, ch: str, positions: list[Position], total: str) -> str:
    coords = ", ".join(map(str, positions))
    return f"{label} (Labeled as '{ch}'): {coords} --> Total {total}: {len(positions)}"


def _plural(noun: str, n: int) -> str:
    return noun if n == 1 else noun + "s"


def describe_grid(g: Grid) -> str:
    """Object listing with coordinates and totals, one kind per line.

    Kinds with no instance on the grid are omitted.
    """
    lines = [
        f"My position (Labeled as 'm'): {', '.join(map(str, locate(g, 'm')))}",
        f"Human (Labeled as 'h'): {', '.join(map(str, locate(g, 'h')))}",
    ]
    for kind in (CellKind.KEY, CellKind.DOOR):
        for color in COLORS:
            cell = Cell(kind, color)
            found = locate(g, cell)
            if found:
                name = _plural(f"{color.title} {kind.value}", len(found))
                lines.append(_listing(name, cell.char, found, name))
    for ch, noun in (("g", "Gem"), ("W", "Wall"), (".", "Empty space")):
        found = locate(g, ch)
        if found:
            name = _plural(noun, len(found))
            lines.append(_listing(name, ch, found, name))
    return "\n".join(lines)
