"""Completion backends and the reply parser.

A reply in the with-norms condition looks like::

    Norm: Quantity Violation. <reasoning>
    Response: <text shown to the human>

Without norms only the ``Response:`` field is expected.
"""
from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from .grid import Position
from .instruction import COLOR_WORDS, parse_instruction
from .norms import NormLabel, respond
from .prompting import Condition, PromptConfig, PromptDocument


class BackendError(RuntimeError):
    pass


class BackendUnavailable(BackendError):
    pass


class MissingCredential(BackendError):
    pass


class NoScriptedReply(BackendError):
    pass


# --------------------------------------------------------------------------
# reply parsing

LABEL_STRINGS = {
    "no violation": NormLabel.NO_VIOLATION,
    "quantity violation": NormLabel.QUANTITY,
    "quality violation": NormLabel.QUALITY,
    "relevance violation": NormLabel.RELATION,
    "relation violation": NormLabel.RELATION,
    "manner violation": NormLabel.MANNER,
}

COORD_RE = re.compile(r"\((\d+)\s*,\s*(\d+)\)")
_NORM_RE = re.compile(r"^\W*norm\W*:\W*(.*)$", re.I | re.M)
_RESPONSE_RE = re.compile(r"^\W*response[^\w\n]*:[*_\s]*(.*)", re.I | re.M | re.S)
_SENTENCE_RE = re.compile(r"(?<=[.?!])\s+")


@dataclass
class ParsedAgentReply:
    norm_label: Optional[NormLabel] = None
    response_text: str = ""
    coords: list = field(default_factory=list)
    colors_mentioned: list = field(default_factory=list)
    options: list = field(default_factory=list)
    parse_ok: bool = False
    norm_text: str = ""

    def to_json(self) -> dict:
        return {
            "norm_label": self.norm_label.value if self.norm_label else None,
            "norm_text": self.norm_text,
            "response_text": self.response_text,
            "coords": [[p.row, p.col] for p in self.coords],
            "colors_mentioned": list(self.colors_mentioned),
            "options": list(self.options),
            "parse_ok": self.parse_ok,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ParsedAgentReply":
        return cls(
            NormLabel(d["norm_label"]) if d.get("norm_label") else None,
            d.get("response_text", ""),
            [Position(int(r), int(c)) for r, c in d.get("coords", [])],
            list(d.get("colors_mentioned", [])),
            list(d.get("options", [])),
            bool(d.get("parse_ok", False)),
            d.get("norm_text", ""),
        )


def _label_of(norm_line: str) -> Optional[NormLabel]:
    text = re.sub(r"[^a-z ]+", " ", norm_line.lower())
    text = " ".join(text.split())
    for name, label in LABEL_STRINGS.items():
        if text.startswith(name):
            return label
    return None


def _split_top_level(text: str) -> list:
    """Split on commas and " or " outside parentheses."""
    parts, depth, buf, i = [], 0, [], 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(depth - 1, 0)
        if depth == 0 and ch == ",":
            parts.append("".join(buf))
            buf = []
        elif depth == 0 and text.startswith(" or ", i):
            parts.append("".join(buf))
            buf = []
            i += 3
        else:
            buf.append(ch)
        i += 1
    parts.append("".join(buf))
    out = []
    for p in parts:
        p = re.sub(r"^(or|and)\s+", "", p.strip())
        if p:
            out.append(p)
    return out


def extract_options(response_text: str) -> list:
    questions = [s for s in _SENTENCE_RE.split(response_text.strip())
                 if s.rstrip().endswith("?")]
    if not questions:
        return []
    q = questions[-1].rstrip().rstrip("?")
    at = q.lower().find("me to ")
    if at < 0:
        return []
    return _split_top_level(q[at + len("me to "):])


def parse_reply(text: str, condition: Condition = Condition.WITH_NORMS) -> ParsedAgentReply:
    """Best-effort parse; never raises."""
    out = ParsedAgentReply()
    if not text or not isinstance(text, str):
        return out
    m = _RESPONSE_RE.search(text)
    # without a Response field the whole reply is kept so it can still be
    # measured, but the parse is not counted as well-formed
    body = (m.group(1) if m else text).strip()
    out.response_text = body
    out.coords = [Position(int(r), int(c)) for r, c in COORD_RE.findall(body)]
    seen = []
    for word in re.findall(r"[a-z]+", body.lower()):
        if word in COLOR_WORDS and word not in seen:
            seen.append(word)
    out.colors_mentioned = seen
    out.options = extract_options(body)
    if condition is Condition.WITH_NORMS:
        nm = _NORM_RE.search(text[:m.start()] if m else text)
        if nm:
            out.norm_text = nm.group(1).strip()
            out.norm_label = _label_of(out.norm_text)
        out.parse_ok = m is not None and out.norm_label is not None
    else:
        out.parse_ok = m is not None
    return out


def format_reply(label: Optional[NormLabel], rationale: str, response: str) -> str:
    if label is None:
        return f"Response: {response}"
    return f"Norm: {label.value}. {rationale}\nResponse: {response}"


# --------------------------------------------------------------------------
# backends

class Backend:
    name = "backend"

    def complete(self, prompt: PromptDocument, cfg: PromptConfig) -> str:
        raise NotImplementedError


class OracleBackend(Backend):
    """Answers from the rule-based oracle; ignores the prompt text."""
    name = "oracle"

    def complete(self, prompt: PromptDocument, cfg: PromptConfig) -> str:
        r = respond(prompt.grid, parse_instruction(prompt.instruction))
        label = r.label if cfg.condition is Condition.WITH_NORMS else None
        return format_reply(label, r.rationale, r.nl_text)


class ScriptedBackend(Backend):
    """Replays canned replies keyed by prompt digest."""
    name = "scripted"

    def __init__(self, replies: Optional[dict] = None):
        self.replies = dict(replies or {})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScriptedBackend":
        replies = {}
        with open(path) as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    replies[row["digest"]] = row["reply"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise BackendError(f"{path}:{n}: bad scripted reply ({exc})") from exc
        return cls(replies)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w") as fh:
            for digest in sorted(self.replies):
                fh.write(json.dumps({"digest": digest, "reply": self.replies[digest]})
                         + "\n")

    def register(self, prompt: Union[PromptDocument, str], reply: str) -> str:
        digest = prompt if isinstance(prompt, str) else prompt.digest
        self.replies[digest] = reply
        return digest

    def complete(self, prompt: PromptDocument, cfg: PromptConfig) -> str:
        try:
            return self.replies[prompt.digest]
        except KeyError:
            raise NoScriptedReply(f"no scripted reply for prompt {prompt.digest[:12]}") \
                from None


DEFAULT_CREDENTIAL_ENV = "NORMGRID_API_KEY"
RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class RemoteChatBackend(Backend):
    """OpenAI-compatible chat-completions client.

    All prompt components go in one user message. Transport errors, 429
    and 5xx responses are retried up to ``retries`` times with
    exponential backoff.
    """
    name = "remote"

    def __init__(self, endpoint: str, model: str,
                 credential_env: str = DEFAULT_CREDENTIAL_ENV,
                 max_in_flight: int = 4, retries: int = 3,
                 backoff: float = 1.0, timeout: float = 60.0,
                 transport=None, sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.credential_env = credential_env
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.transport = transport
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self._client = None
        self._lock = threading.Lock()

    def _credential(self) -> str:
        key = os.environ.get(self.credential_env)
        if not key:
            raise MissingCredential(
                f"set {self.credential_env} to use the remote backend")
        return key

    def _http(self):
        import httpx

        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.timeout,
                                            transport=self.transport)
            return self._client

    def request_body(self, prompt: PromptDocument, cfg: PromptConfig) -> dict:
        return {
            "model": self.model,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "messages": [{"role": "user", "content": prompt.full_text}],
        }

    def complete(self, prompt: PromptDocument, cfg: PromptConfig) -> str:
        import httpx

        key = self._credential()
        client = self._http()
        body = self.request_body(prompt, cfg)
        url = f"{self.endpoint}/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}
        last = "no attempt made"
        with self._slots:
            for attempt in range(self.retries + 1):
                if attempt:
                    self.sleep(self.backoff * 2 ** (attempt - 1))
                try:
                    resp = client.post(url, json=body, headers=headers)
                except httpx.TransportError as exc:
                    last = f"transport error: {exc}"
                    continue
                if resp.status_code in RETRY_STATUS:
                    last = f"HTTP {resp.status_code}"
                    continue
                if resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise BackendError(f"malformed completion payload: {exc}") from exc
        raise BackendUnavailable(f"{url}: gave up after {self.retries + 1} attempts "
                                 f"({last})")

    def close(self):
        if self._client is not None:
            self._client.close()
            self._client = None


def complete(b: Backend, p: PromptDocument, cfg: PromptConfig) -> str:
    return b.complete(p, cfg)


def make_backend(kind: str, *, scripted_path=None, endpoint=None, model=None,
                 credential_env=DEFAULT_CREDENTIAL_ENV, max_in_flight=4) -> Backend:
    if kind == "oracle":
        return OracleBackend()
    if kind == "scripted":
        if not scripted_path:
            raise BackendError("scripted backend needs a replies file")
        return ScriptedBackend.load(scripted_path)
    if kind == "remote":
        if not endpoint or not model:
            raise BackendError("remote backend needs an endpoint and a model name")
        return RemoteChatBackend(endpoint, model, credential_env,
                                 max_in_flight=max_in_flight)
    raise BackendError(f"unknown backend {kind!r}")
