"""normgrid command line.

    normgrid validate [CORPUS]
    normgrid classify GRID "INSTRUCTION"
    normgrid prompt GRID "INSTRUCTION" [--condition with_norms|without_norms]
    normgrid run --config run.yaml [overrides]
    normgrid repl GRID

GRID is a grid file path or the id of a bundled grid (e.g. appendix-1).
Exit status: 0 success, 1 validation or run failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from . import __version__
from .agent import (BackendError, DEFAULT_CREDENTIAL_ENV, OracleBackend,
                    RemoteChatBackend, ScriptedBackend)
from .corpus import CorpusInvariantViolation, default_corpus_dir, load_corpus, load_grids
from .grid import CellKind, Grid, GridError, locate, parse_grid, render_grid
from .instruction import parse_instruction
from .norms import respond
from .planner import (MoveAlong, PassKeys, PickUp, Unlock, analyze_gem, apply_plan,
                      brute_force_required_keys, simulate)
from .prompting import (BadExemplarFile, Condition, PromptConfig, build_prompt)

log = logging.getLogger("normgrid")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    corpus: Optional[str] = None
    conditions: list = field(default_factory=lambda: [c.value for c in Condition])
    backend: str = "oracle"
    model: str = "gpt-4"
    endpoint: str = "https://api.openai.com/v1"
    credential_env: str = DEFAULT_CREDENTIAL_ENV
    scripted_replies: Optional[str] = None
    temperature: float = 0.2
    max_tokens: int = 512
    parallelism: int = 1
    output_dir: str = "normgrid-out"
    ratings: Optional[str] = None
    save_replies: Optional[str] = None

    @classmethod
    def from_mapping(cls, data: dict, base: Optional[Path] = None) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**data)
        if base is not None:
            # relative paths in a config file are relative to that file
            for name in ("corpus", "scripted_replies", "output_dir", "ratings",
                         "save_replies"):
                val = getattr(cfg, name)
                if val and not Path(val).is_absolute():
                    setattr(cfg, name, str(base / val))
        return cfg

    def check(self) -> None:
        if isinstance(self.conditions, str):
            self.conditions = [self.conditions]
        if self.conditions == ["both"]:
            self.conditions = [c.value for c in Condition]
        for c in self.conditions:
            try:
                Condition(c)
            except ValueError:
                raise UsageError(f"unknown condition {c!r}") from None
        if self.backend not in ("oracle", "scripted", "remote"):
            raise UsageError(f"unknown backend {self.backend!r}")
        if int(self.parallelism) < 1:
            raise UsageError("parallelism must be at least 1")
        if int(self.max_tokens) < 1:
            raise UsageError("max_tokens must be positive")


def load_run_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    import yaml

    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"bad config file: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must be a key-value mapping")
    return RunConfig.from_mapping(data, Path(path).resolve().parent)


# --------------------------------------------------------------------------
# helpers

def _load_grid(spec: str, corpus_dir: Optional[str] = None) -> Grid:
    path = Path(spec)
    if path.is_file():
        return parse_grid(path.read_text(), id=path.stem)
    grids = load_grids(Path(corpus_dir or default_corpus_dir()) / "grids")
    if spec in grids:
        return grids[spec]
    raise UsageError(f"{spec!r} is neither a grid file nor a bundled grid id")


def _action_text(a) -> str:
    if isinstance(a, MoveAlong):
        (r0, c0), (r1, c1) = a.path[0], a.path[-1]
        return f"move ({r0}, {c0}) -> ({r1}, {c1}), {a.steps} step{'' if a.steps == 1 else 's'}"
    if isinstance(a, PickUp):
        return f"pick up ({a.pos.row}, {a.pos.col})"
    if isinstance(a, Unlock):
        return f"unlock ({a.pos.row}, {a.pos.col})"
    if isinstance(a, PassKeys):
        return "pass " + ", ".join(c.value for c in a.colors)
    return str(a)


def _print_response(r, out) -> None:
    print(f"Label: {r.label.value}", file=out)
    print(f"Rationale: {r.rationale}", file=out)
    if r.plan is not None and not r.blocked:
        print("Plan:", file=out)
        for a in r.plan.actions:
            print(f"  {_action_text(a)}", file=out)
    print(f"Response: {r.nl_text}", file=out)


# --------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    try:
        corpus = load_corpus(args.corpus)
    except (CorpusInvariantViolation, BadExemplarFile, GridError, OSError) as exc:
        print(f"invalid corpus: {exc}", file=sys.stderr)
        return 1
    checked = mismatches = 0
    for g in corpus.grids.values():
        for gem in locate(g, CellKind.GEM):
            checked += 1
            fast = analyze_gem(g, g.human, gem).required_keys
            slow = brute_force_required_keys(g, g.human, gem)
            if fast != slow:
                mismatches += 1
                print(f"{g.id} gem {gem}: planner {dict(fast)} vs exhaustive "
                      f"{dict(slow)}", file=sys.stderr)
    print(f"{len(corpus.grids)} grids, {len(corpus.entries)} instructions, "
          f"{sum(len(v) for v in corpus.exemplars.values())} exemplars")
    print(f"{checked} gems checked against exhaustive search, "
          f"{mismatches} mismatches ({time.perf_counter() - t0:.2f}s)")
    return 1 if mismatches else 0


def cmd_classify(args) -> int:
    g = _load_grid(args.grid, args.corpus)
    r = respond(g, parse_instruction(args.instruction))
    _print_response(r, sys.stdout)
    return 0


def cmd_prompt(args) -> int:
    corpus = load_corpus(args.corpus, distribution=None, n_grids=None)
    g = _load_grid(args.grid, args.corpus)
    cond = Condition(args.condition)
    doc = build_prompt(g, args.instruction, PromptConfig(cond),
                       corpus.exemplars.get(cond.value, []))
    sys.stdout.write(doc.full_text + "\n")
    return 0


def _backend_for(cfg: RunConfig):
    if cfg.backend == "oracle":
        return OracleBackend()
    if cfg.backend == "scripted":
        if not cfg.scripted_replies:
            raise UsageError("scripted backend needs scripted_replies")
        return ScriptedBackend.load(cfg.scripted_replies)
    b = RemoteChatBackend(cfg.endpoint, cfg.model, cfg.credential_env,
                          max_in_flight=int(cfg.parallelism))
    b._credential()  # fail before the run instead of on every record
    return b


def cmd_run(args) -> int:
    from .evalharness import ingest_ratings, run_experiment, save_records, write_report

    cfg = load_run_config(args.config)
    overrides = {k: v for k, v in vars(args).items()
                 if k in {f.name for f in fields(RunConfig)} and v is not None}
    cfg = replace(cfg, **overrides)
    cfg.check()
    try:
        corpus = load_corpus(cfg.corpus)
    except (CorpusInvariantViolation, BadExemplarFile, OSError) as exc:
        print(f"invalid corpus: {exc}", file=sys.stderr)
        return 1
    try:
        backend = _backend_for(cfg)
    except (BackendError, OSError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 1
    pcfg = PromptConfig(Condition(cfg.conditions[0]), int(cfg.max_tokens),
                        float(cfg.temperature))
    records = run_experiment(corpus, pcfg, backend,
                             [Condition(c) for c in cfg.conditions],
                             parallelism=int(cfg.parallelism))
    if cfg.ratings:
        try:
            ingest_ratings(records, cfg.ratings)
        except (ValueError, OSError) as exc:
            print(f"bad ratings file: {exc}", file=sys.stderr)
            return 1
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_records(records, out / "records.jsonl")
    paths = write_report(records, out)
    if cfg.save_replies:
        script = ScriptedBackend()
        for r in records:
            if not r.failed:
                script.register(r.digest, r.raw_reply)
        script.save(cfg.save_replies)
    sys.stdout.write(paths["text"].read_text())
    failed = sum(r.failed for r in records)
    if failed:
        print(f"{failed} of {len(records)} records failed", file=sys.stderr)
        return 1
    return 0


REPL_HELP = """\
Type an instruction, or one of:
  apply   carry out the last plan and redraw the grid
  reset   restore the starting grid
  show    redraw the grid
  quit    leave"""


def cmd_repl(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    out = stdout or sys.stdout
    start = _load_grid(args.grid, args.corpus)
    g, last = start, None
    backend = None
    if args.backend != "oracle":
        cfg = RunConfig(backend=args.backend, scripted_replies=args.replies,
                        endpoint=args.endpoint or RunConfig.endpoint,
                        model=args.model or RunConfig.model)
        try:
            backend = _backend_for(cfg)
        except (BackendError, OSError) as exc:
            print(f"backend error: {exc}", file=sys.stderr)
            return 1
        corpus = load_corpus(args.corpus, distribution=None, n_grids=None)
        cond = Condition(args.condition)
        exemplars = corpus.exemplars.get(cond.value, [])
    print(render_grid(g), file=out)
    print(REPL_HELP, file=out)
    while True:
        out.write("> ")
        out.flush()
        line = stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        cmd = line.lower()
        if cmd in ("quit", "exit"):
            break
        if cmd == "help":
            print(REPL_HELP, file=out)
        elif cmd == "show":
            print(render_grid(g), file=out)
        elif cmd == "reset":
            g, last = start, None
            print(render_grid(g), file=out)
        elif cmd == "apply":
            if last is None or last.plan is None or last.blocked:
                print("no plan to apply", file=out)
                continue
            sim = simulate(g, last.plan)
            if not sim.ok:
                print(f"plan failed: {sim.reason}", file=out)
                continue
            g = apply_plan(g, last.plan)
            last = None
            print(render_grid(g), file=out)
            if sim.passed:
                print(f"passed to human: {', '.join(c.value for c in sim.passed)}",
                      file=out)
        else:
            try:
                last = respond(g, parse_instruction(line))
            except (ValueError, GridError) as exc:
                print(f"cannot answer on this grid: {exc}", file=out)
                last = None
                continue
            if backend is None:
                _print_response(last, out)
            else:
                doc = build_prompt(g, line, PromptConfig(cond), exemplars)
                try:
                    print(backend.complete(doc, PromptConfig(cond)), file=out)
                except BackendError as exc:
                    print(f"backend error: {exc}", file=out)
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="normgrid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a corpus directory")
    s.add_argument("corpus", nargs="?", default=None)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("classify", help="label one instruction with the oracle")
    s.add_argument("grid")
    s.add_argument("instruction")
    s.add_argument("--corpus", default=None)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("prompt", help="print the assembled prompt")
    s.add_argument("grid")
    s.add_argument("instruction")
    s.add_argument("--condition", choices=[c.value for c in Condition],
                   default=Condition.WITH_NORMS.value)
    s.add_argument("--corpus", default=None)
    s.set_defaults(func=cmd_prompt)

    s = sub.add_parser("run", help="run an experiment and write a report")
    s.add_argument("--config", default=None, help="YAML run configuration")
    s.add_argument("--corpus", default=None)
    s.add_argument("--backend", choices=["oracle", "scripted", "remote"], default=None)
    s.add_argument("--conditions", nargs="+", default=None,
                   choices=[c.value for c in Condition] + ["both"])
    s.add_argument("--model", default=None)
    s.add_argument("--endpoint", default=None)
    s.add_argument("--credential-env", dest="credential_env", default=None)
    s.add_argument("--scripted-replies", dest="scripted_replies", default=None)
    s.add_argument("--temperature", type=float, default=None)
    s.add_argument("--max-tokens", dest="max_tokens", type=int, default=None)
    s.add_argument("--parallelism", type=int, default=None)
    s.add_argument("--output-dir", dest="output_dir", default=None)
    s.add_argument("--ratings", default=None)
    s.add_argument("--save-replies", dest="save_replies", default=None,
                   help="write replies as a scripted-backend file")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("repl", help="interactive session on one grid")
    s.add_argument("grid")
    s.add_argument("--corpus", default=None)
    s.add_argument("--backend", choices=["oracle", "scripted", "remote"],
                   default="oracle")
    s.add_argument("--replies", default=None)
    s.add_argument("--endpoint", default=None)
    s.add_argument("--model", default=None)
    s.add_argument("--condition", choices=[c.value for c in Condition],
                   default=Condition.WITH_NORMS.value)
    s.set_defaults(func=cmd_repl)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"normgrid: {exc}", file=sys.stderr)
        return 2
    except GridError as exc:
        print(f"normgrid: bad grid: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
