"""Four-part prompt assembly for the with-norms and without-norms conditions.

Prompt text lives in ``templates/<condition>/``:

    1_general.txt   background, grid layout and key points
    2_norms.txt     norm definitions (with-norms only)
    3_response.txt  response request wrapping the instruction
    4_fewshot.txt   header around the few-shot exemplars
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from string import Template
from typing import Optional, Union

from .grid import Grid, describe_grid, render_matrix


class Condition(str, Enum):
    WITH_NORMS = "with_norms"
    WITHOUT_NORMS = "without_norms"


DEFAULT_MAX_TOKENS = 512
DEFAULT_TEMPERATURE = 0.2
DEFAULT_EXEMPLAR_COUNT = 14


@dataclass(frozen=True)
class PromptConfig:
    condition: Condition = Condition.WITH_NORMS
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE


@dataclass(frozen=True)
class Exemplar:
    grid_id: str
    instruction: str
    response: str
    norm: Optional[str] = None

    def render(self) -> str:
        lines = [f"Instruction: {self.instruction}"]
        if self.norm is not None:
            lines.append(f"Norm: {self.norm}")
        lines.append(f"Response: {self.response}")
        return "\n".join(lines)


class BadExemplarFile(ValueError):
    pass


class ExemplarConditionMismatch(ValueError):
    pass


@dataclass
class PromptDocument:
    condition: Condition
    components: list  # [(name, text)] in prompt order
    grid: Grid = field(repr=False)
    instruction: str = ""

    @property
    def full_text(self) -> str:
        return "\n\n".join(text for _, text in self.components)

    @property
    def digest(self) -> str:
        return prompt_digest(self.full_text)

    def component(self, name: str) -> Optional[str]:
        return dict(self.components).get(name)


def prompt_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _template_dir() -> Path:
    return Path(str(resources.files("normgrid") / "templates"))


def load_template(condition: Condition, name: str,
                  template_dir: Union[str, Path, None] = None) -> Optional[Template]:
    path = Path(template_dir or _template_dir()) / condition.value / name
    if not path.exists():
        return None
    return Template(path.read_text().rstrip("\n"))


def load_exemplars(source: Union[str, Path], grids: dict,
                   expected: Optional[int] = DEFAULT_EXEMPLAR_COUNT) -> list:
    """Read an exemplar JSONL file and check it against the known grids."""
    path = Path(source)
    try:
        rows = [json.loads(line) for line in path.read_text().splitlines()
                if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise BadExemplarFile(f"{path}: {exc}") from exc
    if not rows:
        raise BadExemplarFile(f"{path}: no exemplars")
    if expected is not None and len(rows) != expected:
        raise BadExemplarFile(f"{path}: {len(rows)} exemplars, expected {expected}")
    out = []
    for i, row in enumerate(rows):
        try:
            ex = Exemplar(row["grid_id"], row["instruction"], row["response"],
                          row.get("norm"))
        except (KeyError, TypeError) as exc:
            raise BadExemplarFile(f"{path}:{i + 1}: missing field {exc}") from exc
        if ex.grid_id not in grids:
            raise BadExemplarFile(f"{path}:{i + 1}: unknown grid {ex.grid_id!r}")
        if not ex.response.strip():
            raise BadExemplarFile(f"{path}:{i + 1}: empty response")
        out.append(ex)
    with_norm = {ex.norm is not None for ex in out}
    if len(with_norm) > 1:
        raise BadExemplarFile(f"{path}: some exemplars have a norm, some do not")
    return out


def build_prompt(g: Grid, instruction: str, cfg: PromptConfig,
                 exemplars: list,
                 template_dir: Union[str, Path, None] = None) -> PromptDocument:
    cond = cfg.condition
    if any((ex.norm is not None) != (cond is Condition.WITH_NORMS)
           for ex in exemplars):
        raise ExemplarConditionMismatch(
            f"exemplars do not match condition {cond.value}")
    fields = {
        "grid_matrix": render_matrix(g),
        "grid_description": describe_grid(g),
        "instruction": instruction,
        "exemplars": "\n".join(ex.render() for ex in exemplars),
    }
    components = []
    for name, fname in (("general_cot", "1_general.txt"),
                        ("norms", "2_norms.txt"),
                        ("response_request", "3_response.txt"),
                        ("exemplars", "4_fewshot.txt")):
        tpl = load_template(cond, fname, template_dir)
        if tpl is None:
            if name == "norms":
                continue
            raise FileNotFoundError(f"missing template {cond.value}/{fname}")
        components.append((name, tpl.substitute(fields)))
    if cond is Condition.WITH_NORMS and components[1][0] != "norms":
        raise FileNotFoundError("with-norms condition needs 2_norms.txt")
    return PromptDocument(cond, components, g, instruction)
