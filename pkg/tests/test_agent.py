import json
import threading

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from normgrid.agent import (BackendError, BackendUnavailable, MissingCredential,
                            NoScriptedReply, OracleBackend, RemoteChatBackend,
                            ScriptedBackend, complete, format_reply, parse_reply)
from normgrid.grid import Position
from normgrid.norms import NormLabel
from normgrid.prompting import Condition, PromptConfig, build_prompt

P = Position
ENV = "NORMGRID_TEST_KEY"


@pytest.fixture
def prompt(corpus):
    return build_prompt(corpus.grids["appendix-1"], "Can you dance?", PromptConfig(),
                        corpus.exemplars["with_norms"])


# ---------------------------------------------------------------- parser

def test_figure_4a(figure_replies):
    r = parse_reply(figure_replies["4a"])
    assert r.parse_ok and r.norm_label is NormLabel.QUANTITY
    assert {P(4, 8), P(1, 1), P(1, 3)} <= set(r.coords)
    assert r.colors_mentioned == ["red"]


def test_figure_4b(figure_replies):
    r = parse_reply(figure_replies["4b"], Condition.WITHOUT_NORMS)
    assert r.parse_ok and r.norm_label is None
    assert r.coords == [P(4, 8), P(6, 8), P(1, 1), P(8, 4), P(9, 4)]


def test_figure_5a(figure_replies):
    r = parse_reply(figure_replies["5a"])
    assert r.norm_label is NormLabel.NO_VIOLATION
    assert r.coords == [P(0, 5), P(2, 1)]


def test_figure_5b(figure_replies):
    r = parse_reply(figure_replies["5b"], Condition.WITHOUT_NORMS)
    assert r.coords == [P(0, 5), P(2, 1), P(3, 8), P(3, 9), P(3, 8)]


def test_norm_label_ignored_without_norms(figure_replies):
    r = parse_reply(figure_replies["4a"], Condition.WITHOUT_NORMS)
    assert r.norm_label is None and r.parse_ok


def test_empty_reply():
    r = parse_reply("")
    assert not r.parse_ok and r.norm_label is None
    assert r.coords == [] and r.options == [] and r.response_text == ""


def test_relevance_spelling_normalizes():
    for name in ("Relevance Violation", "Relation Violation", "relation violation"):
        assert parse_reply(f"Norm: {name}.\nResponse: ok").norm_label is NormLabel.RELATION


def test_markup_tolerated():
    r = parse_reply("**Norm:** *Manner Violation.* unclear\n**Response:** Which one?")
    assert r.norm_label is NormLabel.MANNER and r.response_text == "Which one?"


def test_options_from_exemplar_question():
    text = ("Response: There are two yellow keys on the grid. Could you clarify which "
            "key you're referring to? Do you want me to collect the yellow key at (0,4) "
            "or (4,6), or do you want me to collect both of them?")
    assert parse_reply(text).options == [
        "collect the yellow key at (0,4)", "(4,6)",
        "do you want me to collect both of them"]


def test_missing_response_field_is_not_ok():
    r = parse_reply("Norm: No Violation. fine")
    assert not r.parse_ok and r.norm_label is NormLabel.NO_VIOLATION


@given(st.text(max_size=200))
def test_parser_never_raises(text):
    parse_reply(text)
    parse_reply(text, Condition.WITHOUT_NORMS)


def test_format_reply():
    assert format_reply(None, "x", "hi") == "Response: hi"
    assert format_reply(NormLabel.MANNER, "why", "hi") == \
        "Norm: Manner Violation. why\nResponse: hi"


# ---------------------------------------------------------------- backends

def test_oracle_backend(prompt):
    reply = complete(OracleBackend(), prompt, PromptConfig())
    assert reply.startswith("Norm: Relation Violation.")
    plain = complete(OracleBackend(), prompt, PromptConfig(Condition.WITHOUT_NORMS))
    assert plain.startswith("Response: ")


def test_scripted_backend(prompt, tmp_path):
    b = ScriptedBackend()
    b.register(prompt, "Response: canned")
    assert complete(b, prompt, PromptConfig()) == "Response: canned"
    path = tmp_path / "replies.jsonl"
    b.save(path)
    again = ScriptedBackend.load(path)
    assert again.complete(prompt, PromptConfig()) == "Response: canned"
    with pytest.raises(NoScriptedReply):
        ScriptedBackend().complete(prompt, PromptConfig())


def test_scripted_bad_file(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(BackendError):
        ScriptedBackend.load(path)


def _remote(handler, **kw):
    return RemoteChatBackend("https://llm.test/v1", "test-model", credential_env=ENV,
                             transport=httpx.MockTransport(handler),
                             sleep=lambda s: None, **kw)


def _ok(content="Response: hi"):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_remote_requires_credential(prompt, monkeypatch):
    monkeypatch.delenv(ENV, raising=False)
    with pytest.raises(MissingCredential):
        _remote(lambda req: _ok()).complete(prompt, PromptConfig())


def test_remote_request_shape(prompt, monkeypatch):
    monkeypatch.setenv(ENV, "secret")
    seen = []

    def handler(req):
        seen.append(req)
        return _ok("Norm: No Violation. ok\nResponse: fine")

    out = _remote(handler).complete(prompt, PromptConfig(max_tokens=100, temperature=0.5))
    assert out.endswith("Response: fine")
    req = seen[0]
    assert str(req.url) == "https://llm.test/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer secret"
    body = json.loads(req.content)
    assert body["model"] == "test-model"
    assert (body["max_tokens"], body["temperature"]) == (100, 0.5)
    assert body["messages"] == [{"role": "user", "content": prompt.full_text}]


def test_remote_retries_then_succeeds(prompt, monkeypatch):
    monkeypatch.setenv(ENV, "k")
    calls, sleeps = [], []

    def handler(req):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503)
        return _ok()

    b = _remote(handler)
    b.sleep = sleeps.append
    assert b.complete(prompt, PromptConfig()) == "Response: hi"
    assert len(calls) == 3
    assert sleeps == [1.0, 2.0]


def test_remote_gives_up_after_three_retries(prompt, monkeypatch):
    monkeypatch.setenv(ENV, "k")
    calls = []

    def handler(req):
        calls.append(1)
        raise httpx.ConnectError("down", request=req)

    with pytest.raises(BackendUnavailable):
        _remote(handler).complete(prompt, PromptConfig())
    assert len(calls) == 4


def test_remote_client_error_not_retried(prompt, monkeypatch):
    monkeypatch.setenv(ENV, "k")
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(400, text="bad request")

    with pytest.raises(BackendError):
        _remote(handler).complete(prompt, PromptConfig())
    assert len(calls) == 1


def test_remote_in_flight_cap(prompt, monkeypatch):
    monkeypatch.setenv(ENV, "k")
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}
    gate = threading.Event()

    def handler(req):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        gate.wait(0.05)
        with lock:
            state["now"] -= 1
        return _ok()

    b = _remote(handler, max_in_flight=2)
    threads = [threading.Thread(target=b.complete, args=(prompt, PromptConfig()))
               for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert state["peak"] <= 2
