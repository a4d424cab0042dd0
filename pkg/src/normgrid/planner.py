"""Reachability, key requirements and agent action plans.

Movement is 4-connected. Walls always block. A locked door blocks until it
is opened, and opening a door consumes one key of its color; opened doors
stay open. Only the agent moves during a plan. The human is static, and
the doors it would unlock with passed keys are accounted for by
``analyze_gem``.
"""
from __future__ import annotations

import heapq
import itertools
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

from .grid import COLORS, CellKind, Color, Grid, Position, locate

KeyMultiset = Counter  # Color -> count, zero entries dropped
Path = list  # list[Position], start and goal included


def keys_on_grid(g: Grid) -> KeyMultiset:
    return Counter(g.cell(p).color for p in locate(g, CellKind.KEY))


def path_steps(path: Optional[list]) -> Optional[int]:
    return None if path is None else len(path) - 1


def _color_vector(counts: KeyMultiset) -> tuple[int, ...]:
    return tuple(counts.get(c, 0) for c in COLORS)


# --------------------------------------------------------------------------
# actions and plans

@dataclass(frozen=True)
class MoveAlong:
    path: tuple[Position, ...]

    @property
    def steps(self) -> int:
        return len(self.path) - 1


@dataclass(frozen=True)
class PickUp:
    pos: Position


@dataclass(frozen=True)
class PassKeys:
    colors: tuple[Color, ...]


@dataclass(frozen=True)
class Unlock:
    pos: Position


AgentAction = Union[MoveAlong, PickUp, PassKeys, Unlock]


@dataclass(frozen=True)
class Plan:
    actions: tuple = ()

    @property
    def total_steps(self) -> int:
        return sum(a.steps for a in self.actions if isinstance(a, MoveAlong))

    @property
    def pickups(self) -> list[Position]:
        return [a.pos for a in self.actions if isinstance(a, PickUp)]

    @property
    def unlocks(self) -> list[Position]:
        return [a.pos for a in self.actions if isinstance(a, Unlock)]

    @property
    def passed(self) -> KeyMultiset:
        out = Counter()
        for a in self.actions:
            if isinstance(a, PassKeys):
                out.update(a.colors)
        return out

    def __bool__(self) -> bool:
        return bool(self.actions)


class PlanError(Exception):
    pass


class InsufficientKeys(PlanError):
    def __init__(self, color: Color, needed: int, available: int):
        super().__init__(
            f"need {needed} {color.value} key(s), grid has {available}")
        self.color = color


class CannotReach(PlanError):
    pass


class CannotReachKey(CannotReach):
    pass


class CannotReachHuman(CannotReach):
    pass


class CannotReachDoor(CannotReach):
    pass


# --------------------------------------------------------------------------
# search

def _walkable(g: Grid, avoid: Iterable[Position] = (),
              opened: Iterable[Position] = ()) -> Callable[[Position], bool]:
    avoid, opened = set(avoid), set(opened)

    def ok(p: Position) -> bool:
        if not g.in_bounds(p) or p in avoid:
            return False
        kind = g.cell(p).kind
        if kind is CellKind.WALL:
            return False
        return kind is not CellKind.DOOR or p in opened
    return ok


def _bfs(g: Grid, start: Position, passable) -> tuple[dict, dict]:
    dist, parent = {start: 0}, {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in cur.neighbors():
            if nxt not in dist and passable(nxt):
                dist[nxt] = dist[cur] + 1
                parent[nxt] = cur
                queue.append(nxt)
    return dist, parent


def _trace(parent: dict, goal) -> list:
    out = []
    while goal is not None:
        out.append(goal)
        goal = parent[goal]
    return out[::-1]


def shortest_path(g: Grid, start: Position, goal: Position,
                  openable: Optional[KeyMultiset] = None, *,
                  avoid: Iterable[Position] = (),
                  opened: Iterable[Position] = ()) -> Optional[Path]:
    """Minimal-step path from ``start`` to ``goal`` or ``None``.

    Locked doors may be crossed while ``openable`` still holds a key of
    their color; crossing a door for the first time spends that key.
    Cells in ``avoid`` are never entered, doors in ``opened`` are free.
    """
    openable = Counter(openable or {})
    walk = _walkable(g, avoid, opened)
    pre_opened = frozenset(opened)
    root = (start, frozenset())
    parent = {root: None}
    queue = deque([root])
    while queue:
        state = queue.popleft()
        pos, spent = state
        if pos == goal:
            return [s[0] for s in _trace(parent, state)]
        for nxt in pos.neighbors():
            if not g.in_bounds(nxt) or nxt in avoid:
                continue
            cell = g.cell(nxt)
            nspent = spent
            if cell.kind is CellKind.DOOR and nxt not in pre_opened:
                if nxt not in spent:
                    used = sum(1 for d in spent if g.cell(d).color == cell.color)
                    if used >= openable[cell.color]:
                        continue
                    nspent = spent | {nxt}
            elif not walk(nxt):
                continue
            nstate = (nxt, nspent)
            if nstate not in parent:
                parent[nstate] = state
                queue.append(nstate)
    return None


@dataclass
class GemAnalysis:
    gem: Position
    required_keys: KeyMultiset
    blocking_doors: list
    human_cost: Optional[int]  # None when unreachable
    path: Optional[list] = field(default=None, repr=False)

    @property
    def reachable(self) -> bool:
        return self.human_cost is not None


def analyze_gem(g: Grid, actor: Position, gem: Position) -> GemAnalysis:
    """Cheapest way for ``actor`` to reach ``gem`` if handed keys.

    Dijkstra over (position, opened doors) with a lexicographic cost:
    fewest keys, then fewest steps, then fewest red/yellow/blue keys in
    that order. Keys are bounded by how many of each color the grid holds.
    """
    budget = keys_on_grid(g)
    ncolors = len(COLORS)
    start = (actor, frozenset())
    zero = (0, 0) + (0,) * ncolors
    best = {start: zero}
    parent = {start: None}
    tie = itertools.count()
    heap = [(zero, next(tie), start)]
    while heap:
        cost, _, state = heapq.heappop(heap)
        if best.get(state) != cost:
            continue
        pos, opened = state
        if pos == gem:
            doors = []
            for p, o in _trace(parent, state):
                doors.extend(sorted(o - set(doors)))
            needed = Counter(g.cell(d).color for d in opened)
            return GemAnalysis(gem, needed, doors, cost[1],
                               [s[0] for s in _trace(parent, state)])
        for nxt in pos.neighbors():
            if not g.in_bounds(nxt):
                continue
            cell = g.cell(nxt)
            if cell.kind is CellKind.WALL:
                continue
            nopened, ncost = opened, (cost[0], cost[1] + 1) + cost[2:]
            if cell.kind is CellKind.DOOR and nxt not in opened:
                used = sum(1 for d in opened if g.cell(d).color == cell.color)
                if used >= budget[cell.color]:
                    continue
                nopened = opened | {nxt}
                vec = list(ncost)
                vec[0] += 1
                vec[2 + COLORS.index(cell.color)] += 1
                ncost = tuple(vec)
            nstate = (nxt, nopened)
            if nstate not in best or ncost < best[nstate]:
                best[nstate] = ncost
                parent[nstate] = state
                heapq.heappush(heap, (ncost, next(tie), nstate))
    return GemAnalysis(gem, Counter(), [], None)


def brute_force_required_keys(g: Grid, actor: Position,
                              gem: Position) -> Optional[KeyMultiset]:
    """Reference answer for ``analyze_gem(...).required_keys``.

    Tries door subsets by increasing size (never more doors of a color than
    keys of that color) and runs a plain BFS with exactly those doors open.
    Among the smallest working subsets the one with the fewest steps wins,
    then the lowest red/yellow/blue count vector. ``None`` if unreachable.
    """
    budget = keys_on_grid(g)
    doors = locate(g, CellKind.DOOR)
    for size in range(len(doors) + 1):
        found = []
        for subset in itertools.combinations(doors, size):
            counts = Counter(g.cell(d).color for d in subset)
            if any(counts[c] > budget[c] for c in counts):
                continue
            dist, _ = _bfs(g, actor, _walkable(g, opened=subset))
            if gem in dist:
                found.append((dist[gem], _color_vector(counts), counts))
        if found:
            return min(found, key=lambda t: t[:2])[2]
    return None


# --------------------------------------------------------------------------
# agent plans

def _agent_walk(g: Grid, opened=()):
    return _walkable(g, avoid=[g.human], opened=opened)


def _nearest(dist: dict, targets: Iterable[Position]) -> Optional[Position]:
    reachable = [t for t in targets if t in dist]
    if not reachable:
        return None
    return min(reachable, key=lambda p: (dist[p], p.row, p.col))


def _collect(g: Grid, needed: KeyMultiset, pos: Position, opened=()):
    """Greedy nearest-first pickup of ``needed``; returns actions, end, colors."""
    needed = +Counter(needed)
    available = keys_on_grid(g)
    for color in COLORS:
        if needed[color] > available[color]:
            raise InsufficientKeys(color, needed[color], available[color])
    actions, held, taken = [], [], set()
    remaining = Counter(needed)
    while +remaining:
        dist, parent = _bfs(g, pos, _agent_walk(g, opened))
        targets = [p for p in locate(g, CellKind.KEY)
                   if p not in taken and remaining[g.cell(p).color] > 0]
        key = _nearest(dist, targets)
        if key is None:
            missing = sorted((c.value for c in +remaining))
            raise CannotReachKey(f"agent cannot reach a {'/'.join(missing)} key")
        path = _trace(parent, key)
        if len(path) > 1:
            actions.append(MoveAlong(tuple(path)))
        actions.append(PickUp(key))
        color = g.cell(key).color
        held.append(color)
        taken.add(key)
        remaining[color] -= 1
        pos = key
    return actions, pos, held


def agent_fetch_plan(g: Grid, needed: KeyMultiset) -> Plan:
    """Collect ``needed`` keys nearest-first, then hand them to the human."""
    needed = +Counter(needed)
    if not needed:
        return Plan()
    actions, pos, held = _collect(g, needed, g.agent)
    human = g.human
    if not pos.adjacent(human):
        dist, parent = _bfs(g, pos, _agent_walk(g))
        spot = _nearest(dist, [n for n in human.neighbors() if g.in_bounds(n)])
        if spot is None:
            raise CannotReachHuman(
                f"agent cannot get next to the human at {human}")
        actions.append(MoveAlong(tuple(_trace(parent, spot))))
    actions.append(PassKeys(tuple(held)))
    return Plan(tuple(actions))


def agent_unlock_plan(g: Grid, doors: list) -> Plan:
    """Collect one key per door, then unlock the doors in the given order."""
    if not doors:
        return Plan()
    needed = Counter(g.cell(d).color for d in doors)
    actions, pos, _ = _collect(g, needed, g.agent)
    opened = []
    for door in doors:
        if not pos.adjacent(door):
            dist, parent = _bfs(g, pos, _agent_walk(g, opened))
            spot = _nearest(dist, [n for n in door.neighbors() if g.in_bounds(n)])
            if spot is None:
                raise CannotReachDoor(f"agent cannot get next to the door at {door}")
            actions.append(MoveAlong(tuple(_trace(parent, spot))))
            pos = spot
        actions.append(Unlock(door))
        opened.append(door)
    return Plan(tuple(actions))


# --------------------------------------------------------------------------
# simulation

@dataclass
class SimResult:
    ok: bool
    agent: Position
    held: KeyMultiset
    passed: KeyMultiset
    opened: frozenset
    picked: frozenset
    failed_at: Optional[int] = None
    reason: str = ""


def simulate(g: Grid, plan: Plan) -> SimResult:
    """Execute ``plan`` on ``g``; stop at the first invalid action."""
    agent, human = g.agent, g.human
    held, passed = Counter(), Counter()
    opened, picked = set(), set()

    def result(i=None, reason=""):
        return SimResult(i is None, agent, +held, +passed, frozenset(opened),
                         frozenset(picked), i, reason)

    for i, action in enumerate(plan.actions):
        if isinstance(action, MoveAlong):
            path = action.path
            if not path or path[0] != agent:
                return result(i, f"path does not start at agent position {agent}")
            walk = _walkable(g, avoid=[human], opened=opened)
            for a, b in zip(path, path[1:]):
                if not a.adjacent(b):
                    return result(i, f"{a} -> {b} is not a single step")
                if not walk(b):
                    return result(i, f"cannot enter {b}")
            agent = path[-1]
        elif isinstance(action, PickUp):
            pos = action.pos
            if pos != agent:
                return result(i, f"agent at {agent} cannot pick up at {pos}")
            if not g.in_bounds(pos) or g.cell(pos).kind is not CellKind.KEY \
                    or pos in picked:
                return result(i, f"no key at {pos}")
            picked.add(pos)
            held[g.cell(pos).color] += 1
        elif isinstance(action, PassKeys):
            if not agent.adjacent(human):
                return result(i, f"agent at {agent} is not next to the human")
            want = Counter(action.colors)
            if any(held[c] < n for c, n in want.items()):
                return result(i, "passing keys the agent does not hold")
            held.subtract(want)
            passed.update(want)
        elif isinstance(action, Unlock):
            pos = action.pos
            if not g.in_bounds(pos) or g.cell(pos).kind is not CellKind.DOOR:
                return result(i, f"no door at {pos}")
            if pos in opened:
                return result(i, f"door at {pos} already open")
            if not agent.adjacent(pos):
                return result(i, f"agent at {agent} is not next to door {pos}")
            color = g.cell(pos).color
            if held[color] < 1:
                return result(i, f"no {color.value} key to unlock {pos}")
            held[color] -= 1
            opened.add(pos)
        else:
            return result(i, f"unknown action {action!r}")
    return result()


def apply_plan(g: Grid, plan: Plan) -> Grid:
    """Grid after a successful ``plan``: agent moved, keys taken, doors open."""
    sim = simulate(g, plan)
    if not sim.ok:
        raise PlanError(f"action {sim.failed_at}: {sim.reason}")
    changes = {p: "." for p in sim.picked | sim.opened}
    changes[g.agent] = "."
    changes[sim.agent] = "m"
    return g.replace(changes)
