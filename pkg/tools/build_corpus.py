"""Regenerate the bundled corpus under src/normgrid/data/corpus.

Five grids are written by hand (the printed layout and four layouts
rebuilt from worked examples); the other twenty come from a seeded
generator. Instructions are drawn from fixed templates, labelled by the
rule-based classifier, and picked to match the target type counts.

    python tools/build_corpus.py [--seed 7] [--out DIR]
"""
from __future__ import annotations

import argparse
import random
from collections import Counter
from pathlib import Path

from normgrid.corpus import (TABLE3_DISTRIBUTION, CorpusEntry, GoldAnnotation,
                             write_jsonl)
from normgrid.grid import (COLORS, CellKind, Grid, door_char,
                           key_char, locate, to_file_text, validate)
from normgrid.instruction import parse_instruction
from normgrid.norms import LABEL_TO_TYPE, PLAN_LABELS, NormLabel, respond
from normgrid.planner import (_agent_walk, _bfs, analyze_gem,
                              brute_force_required_keys)

HAND_GRIDS = {
    "appendix-1": """\
r...mWWg
y.WW.WW.
WWWW.WW.
.R....h.
.W.WWWW.
.W.WWWWY
YW.WWWW.
gWgWWWWg""",
    "appendix-2": """\
r....W....
.WWW.W..m.
.....W....
WWWW....r.
...W...h..
.g.R......
...W.WWWWR
WWWW....W.
......g.Wg
r.......W.""",
    "appendix-3": """\
r...y...m
WWW...WWW
gY..h..Yg
WWW...WWW
....W.y..
.WWRWWWW.
.Wg....W.""",
    "figure-4": """\
..m.......
.r.r......
..........
.....WWWWW
..h..RR.gW
.....WWW.W
.....WWWgW
.....WWWWW
..........
r........g""",
    "figure-5": """\
.....r.m..
W.........
gR.h..WWWW
WW....WBRg
......W.WW
b........g""",
}

# instructions that must appear, keyed to their grid
FIXED = [
    ("appendix-1", "Pick up the red key."),
    ("appendix-1", "Can you get the green key?"),
    ("appendix-1", "Can you dance?"),
    ("appendix-2", "Can you get the red key?"),
    ("appendix-3", "Pick up the yellow key."),
    ("figure-4", "Can you pass me the red keys?"),
    ("figure-5", "Can you get the red key?"),
]

KEY_TEMPLATES = [
    "Pick up the {c} key.",
    "Can you get the {c} key?",
    "Can you pass me the {c} keys?",
    "Collect two {c} keys.",
    "Bring me the {c} key.",
    "Grab a {c} key.",
    "Please fetch the {c} key for me.",
    "Hand me one {c} key.",
    "Collect three {c} keys.",
]
DOOR_TEMPLATES = ["Unlock the {c} door.", "Can you open the {c} doors?"]
OTHER_TEMPLATES = [
    "Can you get the gem?",
    "Find the {c} gem.",
    "Grab a key for me.",
]
OFF_TOPIC = [
    "Can you dance?",
    "Sing me a song.",
    "What is the weather like today?",
    "Can you make me a cup of coffee?",
    "Tell me a joke.",
    "Do a backflip.",
]
REQUEST_COLORS = ["red", "yellow", "blue", "green", "purple"]


# --------------------------------------------------------------------------
# grid generation

def _pocket(cells, h, w, rng, color, doors):
    """Carve a one-wide dead-end corridor from a border inward, gem at the end."""
    side = rng.choice("LRTB")
    length = rng.randint(2, 3) + (doors - 1)
    if side in "LR":
        r = rng.randint(1, h - 2)
        cols = list(range(length)) if side == "L" else list(range(w - 1, w - 1 - length, -1))
        line = [(r, c) for c in cols]
        walls = [(r + dr, c) for c in cols for dr in (-1, 1)]
    else:
        c = rng.randint(1, w - 2)
        rows = list(range(length)) if side == "T" else list(range(h - 1, h - 1 - length, -1))
        line = [(r, c) for r in rows]
        walls = [(r, c + dc) for r in rows for dc in (-1, 1)]
    if any(cells[r][c] != "." for r, c in line + walls if 0 <= r < h and 0 <= c < w):
        return False
    for r, c in walls:
        if 0 <= r < h and 0 <= c < w:
            cells[r][c] = "W"
    cells[line[0][0]][line[0][1]] = "g"
    for i in range(1, len(line)):
        cells[line[i][0]][line[i][1]] = "."
    for i in range(doors):
        r, c = line[-1 - i]
        cells[r][c] = door_char(color[i])
    return True


def _connected(cells, h, w):
    free = [(r, c) for r in range(h) for c in range(w) if cells[r][c] == "."]
    if not free:
        return False
    seen, stack = {free[0]}, [free[0]]
    while stack:
        r, c = stack.pop()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and (nr, nc) not in seen \
                    and cells[nr][nc] == ".":
                seen.add((nr, nc))
                stack.append((nr, nc))
    return len(seen) == len(free)


def generate_grid(rng: random.Random, gid: str, symmetric: bool) -> Grid:
    while True:
        h, w = rng.randint(7, 10), rng.randint(7, 10)
        if symmetric and w % 2 == 0:
            w += 1
        cells = [["."] * w for _ in range(h)]
        half = w // 2
        npockets = rng.randint(2, 3)
        made = 0
        for _ in range(40):
            if made == npockets:
                break
            doors = 1 if rng.random() < 0.7 else 2
            colors = [rng.choice(COLORS) for _ in range(doors)]
            trial = [row[:] for row in cells]
            if _pocket(trial, h, w, rng, colors, doors):
                if symmetric and any(trial[r][c] != "." for r in range(h)
                                     for c in range(half, w)):
                    continue
                cells = trial
                made += 1
        if made < 2:
            continue
        for _ in range(rng.randint(h * w // 12, h * w // 7)):
            r, c = rng.randrange(h), rng.randrange(half if symmetric else w)
            if cells[r][c] == ".":
                cells[r][c] = "W"
                if not _connected(cells, h, w if not symmetric else half):
                    cells[r][c] = "."
        if symmetric:
            for r in range(h):
                for c in range(half):
                    cells[r][w - 1 - c] = cells[r][c]
        if rng.random() < 0.5:
            free = [(r, c) for r in range(h) for c in range(w) if cells[r][c] == "."]
            r, c = rng.choice(free)
            cells[r][c] = "g"
        free = [(r, c) for r in range(h) for c in range(w) if cells[r][c] == "."]
        if symmetric:
            mid = [(r, c) for r, c in free if c == half]
            if len(mid) < 2:
                continue
            hr, hc = rng.choice(mid)
        else:
            hr, hc = rng.choice(free)
        cells[hr][hc] = "h"
        free.remove((hr, hc))
        ar, ac = rng.choice(free)
        cells[ar][ac] = "m"
        free.remove((ar, ac))
        door_colors = Counter()
        for row in cells:
            for ch in row:
                if ch in "RYB":
                    door_colors[ch.lower()] += 1
        keys = []
        for ch, n in door_colors.items():
            keys += [ch] * (n + (1 if rng.random() < 0.4 else 0))
        if rng.random() < 0.4:
            keys.append(key_char(rng.choice(COLORS)))
        rng.shuffle(free)
        if len(keys) > len(free):
            continue
        for ch, (r, c) in zip(keys, free):
            cells[r][c] = ch
        g = Grid(tuple("".join(row) for row in cells), id=gid)
        if _usable(g):
            return g


def _usable(g: Grid) -> bool:
    try:
        validate(g)
    except ValueError:
        return False
    human = g.human
    gems = locate(g, "g")
    if len(gems) < 2:
        return False
    gated = 0
    for gem in gems:
        a = analyze_gem(g, human, gem)
        if not a.reachable:
            return False
        if a.required_keys != brute_force_required_keys(g, human, gem):
            raise AssertionError(f"planner disagrees with oracle on {g.id}")
        gated += bool(+a.required_keys)
    if not gated:
        return False
    dist, _ = _bfs(g, g.agent, _agent_walk(g))
    if any(k not in dist for k in locate(g, CellKind.KEY)):
        return False
    return any(n in dist for n in human.neighbors() if g.in_bounds(n))


# --------------------------------------------------------------------------
# instructions

def candidates(g: Grid, rng: random.Random) -> list:
    texts = []
    for tpl in KEY_TEMPLATES + DOOR_TEMPLATES + OTHER_TEMPLATES:
        if "{c}" in tpl:
            texts += [tpl.format(c=c) for c in REQUEST_COLORS]
        else:
            texts.append(tpl)
    texts += OFF_TOPIC
    out = []
    for text in texts:
        r = respond(g, parse_instruction(text))
        if r.label in PLAN_LABELS and (r.plan is None or r.blocked):
            continue
        out.append((text, r))
    rng.shuffle(out)
    return out


def gold_from(r) -> GoldAnnotation:
    return GoldAnnotation(r.label, r.inferred_gem, r.plan, list(r.options))


def select(grids: dict, rng: random.Random) -> list:
    quota = {TABLE_LABEL[t]: n for t, n in TABLE3_DISTRIBUTION.items()}
    chosen = []  # (grid_id, text, response)
    used = set()
    for gid, text in FIXED:
        r = respond(grids[gid], parse_instruction(text))
        chosen.append((gid, text, r))
        used.add((gid, text))
        quota[r.label] -= 1
    pools = {gid: candidates(g, rng) for gid, g in grids.items()}
    per_grid = Counter(gid for gid, _, _ in chosen)
    text_uses = Counter(text for _, text, _ in chosen)
    # first pass: every grid gets one instruction of its scarcest label
    order = sorted(grids)
    while sum(quota.values()) > 0:
        progress = False
        for gid in sorted(order, key=lambda k: (per_grid[k], k)):
            if sum(quota.values()) == 0:
                break
            need = [lab for lab, n in sorted(quota.items(), key=lambda kv: -kv[1])
                    if n > 0]
            pick = None
            for lab in need:
                options = [(t, r) for t, r in pools[gid]
                           if r.label is lab and (gid, t) not in used]
                if options:
                    pick = min(options, key=lambda tr: text_uses[tr[0]])
                    break
            if pick is None or per_grid[gid] >= 3:
                continue
            text, r = pick
            chosen.append((gid, text, r))
            used.add((gid, text))
            per_grid[gid] += 1
            text_uses[text] += 1
            quota[r.label] -= 1
            progress = True
        if not progress:
            raise SystemExit(f"cannot satisfy quotas, left: {quota}")
    return chosen


TABLE_LABEL = {t: lab for lab, t in LABEL_TO_TYPE.items()}


# --------------------------------------------------------------------------
# exemplars

APPENDIX_EXEMPLARS = [
    ("appendix-2", "Can you get the red key?",
     "No Violation. Based on the instruction and the grid, I infer that the human wants to collect the gem closest to them at (8,9), which is blocked by a red door. Since only one red key is needed to unlock the door and reach the gem, the instruction is complete and not missing any details.",
     "There are three red keys and two red doors on the grid. To collect the gem at (8,9), only one red door needs to be unlocked. I will pick up the red key at (3,8) since it is closest to both me and the human, and pass it to the human to unlock the red door at (6,9)."),
    ("appendix-1", "Pick up the red key.",
     "Quantity Violation. Based on the instruction and the grid, I infer that the human wants to collect the gem at (7,0), which is beyond a red door. However, before reaching the gem, there is also a yellow door blocking the path. Therefore, I must collect both the red and yellow keys, and since the instruction doesn't mention picking up the yellow key, this results in a Quantity Violation.",
     "There are two yellow doors, one red door, one red key, and one yellow key on the grid. The instruction asks to collect a red key, so the desired gem the human wants to collect is placed beyond the red door at (3,1). However, a yellow door at (6,0) blocks the path to the gem at (7,0). I will collect both the red key at (0,0) and the yellow key at (1,0), then pass them to the human to unlock the doors."),
    ("appendix-1", "Can you get the green key?",
     "Quality Violation. Based on the instruction and the grid, there is no green key, making this an invalid instruction.",
     "There is no green key on the grid. Do you want me to collect the yellow key, the red key, or both?"),
    ("appendix-1", "Can you dance?",
     "Relevance Violation. Based on the instruction and the grid, this request is unrelated to collecting keys or unlocking doors, making it an irrelevant instruction.",
     "I am an AI and can't dance. This instruction is not relevant to the grid, which contains doors, keys, and gems. Would you like me to pass you a key or unlock a door instead?"),
    ("appendix-3", "Pick up the yellow key.",
     "Manner Violation. Based on the instruction and the grid, it is unclear which gem the human wants to collect and which yellow key they are referring to, making this instruction ambiguous.",
     "There are two yellow keys, one red key, one red door, and two yellow doors on the grid. Could you clarify which key you're referring to? Do you want me to collect the yellow key at (0,4) or (4,6), or do you want me to collect both of them?"),
]

# extra exemplar labels beyond the five printed ones
EXTRA_LABELS = [NormLabel.NO_VIOLATION, NormLabel.NO_VIOLATION,
                NormLabel.QUANTITY, NormLabel.QUANTITY,
                NormLabel.QUALITY, NormLabel.QUALITY,
                NormLabel.RELATION,
                NormLabel.MANNER, NormLabel.MANNER]


def exemplars(chosen: list) -> list:
    rows = [dict(grid_id=g, instruction=i, norm=n, response=r)
            for g, i, n, r in APPENDIX_EXEMPLARS]
    skip = {(g, i) for g, i, _, _ in APPENDIX_EXEMPLARS}
    taken_grids = set()
    for lab in EXTRA_LABELS:
        for gid, text, r in chosen:
            if r.label is lab and (gid, text) not in skip and gid not in taken_grids \
                    and not gid.startswith(("appendix", "figure")):
                rows.append(dict(grid_id=gid, instruction=text,
                                 norm=f"{r.label.value}. {r.rationale}",
                                 response=r.nl_text))
                skip.add((gid, text))
                taken_grids.add(gid)
                break
        else:
            raise SystemExit(f"no exemplar available for {lab.value}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1]
                    / "src" / "normgrid" / "data" / "corpus")
    args = ap.parse_args()
    rng = random.Random(args.seed)

    grids = {gid: Grid(tuple(text.splitlines()), id=gid)
             for gid, text in HAND_GRIDS.items()}
    for g in grids.values():
        assert _usable(g) or g.id == "appendix-1", g.id
    n = 0
    while len(grids) < 25:
        n += 1
        gid = f"grid-{n:02d}"
        grids[gid] = generate_grid(rng, gid, symmetric=(n % 2 == 0))

    chosen = select(grids, rng)
    chosen.sort(key=lambda t: (t[0], t[1]))

    out = args.out
    (out / "grids").mkdir(parents=True, exist_ok=True)
    for old in (out / "grids").glob("*.txt"):
        old.unlink()
    for gid, g in grids.items():
        (out / "grids" / f"{gid}.txt").write_text(to_file_text(g))
    entries = []
    for i, (gid, text, r) in enumerate(chosen, 1):
        entries.append(CorpusEntry(f"i{i:02d}", gid, text,
                                   LABEL_TO_TYPE[r.label], gold_from(r)).to_json())
    write_jsonl(out / "instructions.jsonl", entries)

    (out / "exemplars").mkdir(exist_ok=True)
    ex = exemplars(chosen)
    write_jsonl(out / "exemplars" / "with_norms.jsonl", ex)
    write_jsonl(out / "exemplars" / "without_norms.jsonl",
                [{**row, "norm": None} for row in ex])
    print(f"wrote {len(grids)} grids, {len(entries)} instructions, "
          f"{len(ex)} exemplars to {out}")
    print(Counter(e["instruction_type"] for e in entries))


if __name__ == "__main__":
    main()
