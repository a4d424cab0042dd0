import pytest
from hypothesis import given
from hypothesis import strategies as st

from normgrid.instruction import Action, ObjectKind, SemanticInstruction, parse_instruction


@pytest.mark.parametrize("text,action,kind,color,number,count", [
    ("Pick up the red key.", Action.FETCH, ObjectKind.KEY, "red", None, "singular"),
    ("Can you pass me the red keys?", Action.PASS, ObjectKind.KEY, "red", None, "plural"),
    ("Collect two blue keys", Action.FETCH, ObjectKind.KEY, "blue", 2, "specified"),
    ("Unlock the yellow door.", Action.UNLOCK, ObjectKind.DOOR, "yellow", None, "singular"),
    ("Can you open the red doors?", Action.UNLOCK, ObjectKind.DOOR, "red", None, "plural"),
    ("Can you get the green key?", Action.FETCH, ObjectKind.KEY, "green", None, "singular"),
    ("Grab 3 red keys", Action.FETCH, ObjectKind.KEY, "red", 3, "specified"),
    ("Can you get the gem?", Action.FETCH, ObjectKind.GEM, None, None, "singular"),
    ("Bring me both yellow keys", Action.PASS, ObjectKind.KEY, "yellow", 2, "specified"),
])
def test_parse_forms(text, action, kind, color, number, count):
    s = parse_instruction(text)
    assert (s.action, s.object_kind, s.color, s.number, s.count) == \
        (action, kind, color, number, count)
    assert s.raw == text


@pytest.mark.parametrize("text", ["Can you dance?", "", "Tell me a joke.",
                                  "Where is the key?", "pick up the apple"])
def test_out_of_domain(text):
    s = parse_instruction(text)
    assert s.action is Action.OUT_OF_DOMAIN and s.object_kind is None


def test_invariants():
    with pytest.raises(ValueError):
        SemanticInstruction(Action.OUT_OF_DOMAIN, ObjectKind.KEY)
    with pytest.raises(ValueError):
        SemanticInstruction(Action.FETCH, ObjectKind.KEY, number=0)


def test_corpus_instructions_parse_in_domain_or_not(corpus):
    from normgrid.norms import NormLabel
    for e in corpus.entries:
        s = parse_instruction(e.text)
        if s.action is Action.OUT_OF_DOMAIN:
            assert e.gold.label is NormLabel.RELATION


@given(st.text(max_size=60))
def test_total_and_case_insensitive(text):
    a = parse_instruction(text)
    b = parse_instruction(text.lower().replace(".", " ").replace("?", " "))
    assert a == b
