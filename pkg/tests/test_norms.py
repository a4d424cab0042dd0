from collections import Counter

import pytest

from normgrid.agent import parse_reply
from normgrid.grid import Color, Position, parse_grid
from normgrid.instruction import parse_instruction
from normgrid.norms import (LABEL_TO_TYPE, PLAN_LABELS, InstructionType, NoGemOnGrid,
                            NormLabel, TYPE_TO_LABEL, classify, respond)
from normgrid.planner import PassKeys, apply_plan, shortest_path, simulate

P = Position


def ask(g, text):
    return respond(g, parse_instruction(text))


def test_table_mapping_is_bijective():
    assert TYPE_TO_LABEL[InstructionType.CLEAR] is NormLabel.NO_VIOLATION
    assert TYPE_TO_LABEL[InstructionType.AMBIGUOUS] is NormLabel.MANNER
    assert len(set(TYPE_TO_LABEL.values())) == 5
    assert all(TYPE_TO_LABEL[t] is lab for lab, t in LABEL_TO_TYPE.items())


def test_quantity_exemplar(appendix):
    r = ask(appendix, "Pick up the red key.")
    assert r.label is NormLabel.QUANTITY
    assert r.inferred_gem == P(7, 0)
    assert r.plan.pickups == [P(0, 0), P(1, 0)]
    assert isinstance(r.plan.actions[-1], PassKeys)
    assert not r.options
    assert "(0, 0)" in r.nl_text and "(1, 0)" in r.nl_text


def test_quality_exemplar(appendix):
    r = ask(appendix, "Can you get the green key?")
    assert r.label is NormLabel.QUALITY
    assert r.plan is None
    assert [o.obj for o in r.options] == ["the red key", "the yellow key", "both"]
    assert r.nl_text.endswith("or both?")
    assert "no green key" in r.nl_text


def test_relation_exemplar(appendix):
    label, ev = classify(appendix, parse_instruction("Can you dance?"))
    assert label is NormLabel.RELATION
    assert ev.rule == "relation:out_of_domain"
    assert len(ask(appendix, "Can you dance?").options) >= 2


def test_no_violation_single_key(appendix):
    r = ask(appendix, "Pick up the yellow key.")
    assert r.label is NormLabel.NO_VIOLATION
    assert r.inferred_gem == P(7, 7)
    assert r.plan.pickups == [P(1, 0)]


def test_manner_exemplar(corpus):
    r = ask(corpus.grids["appendix-3"], "Pick up the yellow key.")
    assert r.label is NormLabel.MANNER
    gems = {p for o in r.options if not o.combined for p in o.positions
            if corpus.grids["appendix-3"].char(p) == "g"}
    assert gems == {P(2, 0), P(2, 8)}
    assert r.options[-1].combined


def test_figure_grids(corpus):
    r = ask(corpus.grids["figure-4"], "Can you pass me the red keys?")
    assert r.label is NormLabel.QUANTITY
    assert r.inferred_gem == P(4, 8)
    assert r.plan.pickups == [P(1, 1), P(1, 3)]
    r = ask(corpus.grids["figure-5"], "Can you get the red key?")
    assert r.label is NormLabel.NO_VIOLATION
    assert r.plan.pickups == [P(0, 5)]
    r = ask(corpus.grids["appendix-2"], "Can you get the red key?")
    assert r.label is NormLabel.NO_VIOLATION
    assert r.inferred_gem == P(8, 9) and r.plan.pickups == [P(3, 8)]


SINGLE = "gRhRW\nWW.WW\nr.m.r"


def test_ambiguity_injection():
    g = parse_grid(SINGLE)
    assert ask(g, "Get the red key").label is NormLabel.NO_VIOLATION
    g2 = parse_grid(SINGLE.replace("RW", "Rg", 1))
    assert ask(g2, "Get the red key").label is NormLabel.MANNER


def test_counts():
    g = parse_grid(SINGLE)
    assert ask(g, "Collect three red keys").label is NormLabel.QUALITY
    r = ask(g, "Collect three red keys")
    assert "only two red keys" in r.nl_text
    assert ask(g, "Collect one red key").label is NormLabel.NO_VIOLATION
    assert ask(g, "Find the purple gem").label is NormLabel.QUALITY


def test_gem_needing_keys_is_quantity():
    g = parse_grid("gRh.W\nWW.WW\nr.m..")
    r = ask(g, "Can you get the gem?")
    assert r.label is NormLabel.QUANTITY
    assert r.plan.pickups == [P(2, 0)]


def test_no_gem_raises():
    g = parse_grid("rRh\n.m.")
    with pytest.raises(NoGemOnGrid):
        classify(g, parse_instruction("Get the red key"))


def test_oracle_invariants_on_corpus(corpus):
    for e in corpus.entries:
        g = corpus.grid_for(e)
        r = respond(g, parse_instruction(e.text))
        if r.label in PLAN_LABELS:
            assert r.plan is not None and not r.options
            sim = simulate(g, r.plan)
            assert sim.ok
            # with the passed keys (or the doors the agent opened) the human
            # now reaches the inferred gem
            after = apply_plan(g, r.plan)
            assert shortest_path(after, g.human, r.inferred_gem,
                                 openable=sim.passed) is not None
        else:
            assert r.plan is None and len(r.options) >= 2
            for o in r.options:
                for ref in o.refs:
                    for p in ref.positions:
                        assert g.cell(p).kind.value == ref.kind


def test_render_round_trips_through_parser(corpus):
    for e in corpus.entries:
        g = corpus.grid_for(e)
        r = respond(g, parse_instruction(e.text))
        parsed = parse_reply(f"Norm: {r.label.value}. x\nResponse: {r.nl_text}")
        assert parsed.norm_label is r.label
        if r.plan is not None:
            assert set(r.plan.pickups) <= set(parsed.coords)
            assert set(r.plan.unlocks) <= set(parsed.coords)
        assert len(parsed.options) == len(r.options)


def test_blocked_plan_keeps_label(appendix):
    r = ask(appendix, "Unlock the yellow door")
    assert r.label in PLAN_LABELS
    assert r.blocked
    assert "blocked" in r.nl_text


def test_keys_passed_match_requirement(appendix):
    r = ask(appendix, "Pick up the red key.")
    assert r.plan.passed == Counter({Color.RED: 1, Color.YELLOW: 1})
