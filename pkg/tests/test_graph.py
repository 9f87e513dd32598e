from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchsynth import featexp as fx
from sketchsynth.checker import ASSERT, check
from sketchsynth.graph import (
    EvalError, GraphError, apply_binop, build_fpg, digest, project_config, project_space,
    reachable, successors, to_dot, wrap,
)
from sketchsynth.lang import parse
from sketchsynth.transform import abstract_join, characteristic, family_of, project, rewrite_holes, substitute

from generators import any_families, featexps, plain_models


def ordinary_locations(g):
    return g.n_locations - len(g.violation_locs)


def reachable_states(g):
    init = g.initial_state()
    seen, stack = {init}, [init]
    while stack:
        s = stack.pop()
        for _, t in successors(g, s):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def summary(g):
    return check(g, ASSERT).satisfied, reachable(g)


# -- build_fpg -----------------------------------------------------------------------


def test_skip_gives_two_locations_and_one_transition():
    g = build_fpg(parse("init { skip }"))
    assert ordinary_locations(g) == 2
    (t,) = g.transitions
    assert t.delta == fx.TRUE and t.src == g.init_locs[0] and t.dst == g.end_locs[0]


def test_simple_family_hole_transitions(corpus):
    g = build_fpg(rewrite_holes(corpus["simple"], 3).model)
    deltas = [t.delta for t in g.transitions if t.label.startswith("y =")]
    assert deltas == [fx.eq("A", v) for v in range(8)]


def test_do_loop_head_has_exit_and_increment():
    g = build_fpg(parse("byte x; init { do :: break :: x++ od }"))
    out = g.out[g.init_locs[0]]
    assert [t.label for t in out] == ["break", "x = x + 1"]
    assert out[0].dst == g.end_locs[0] and out[1].dst != g.end_locs[0]


def test_assert_leads_to_violation():
    g = build_fpg(parse("byte x; init { assert(x == 1) }"))
    (_, s), = successors(g, g.initial_state())
    assert g.is_violation(s)


def test_build_rejects_model_without_processes():
    from sketchsynth.lang.ast import Model
    with pytest.raises(GraphError):
        build_fpg(Model())


def test_to_dot_mentions_every_transition(corpus):
    g = build_fpg(rewrite_holes(corpus["simple"], 3).model)
    dot = to_dot(g)
    assert dot.startswith("digraph") and dot.count("->") == len(g.transitions)
    assert "@ A=3" in dot


# -- arithmetic -------------------------------------------------------------------------


def test_division_truncates_toward_zero():
    assert apply_binop("/", -7, 2) == -3
    assert apply_binop("%", -7, 2) == -1


def test_division_by_zero_raises():
    with pytest.raises((EvalError, ZeroDivisionError)):
        apply_binop("/", 1, 0)


@pytest.mark.parametrize("typ,value,expected", [
    ("byte", 256, 0), ("byte", -1, 255), ("bool", 5, 1), ("short", 2**15, -(2**15)),
    ("int", 2**31, -(2**31)),
])
def test_store_wraps(typ, value, expected):
    assert wrap(typ, value) == expected


def test_division_by_zero_reaches_violation():
    g = build_fpg(parse("byte x, y; init { y = 1 / x }"))
    (step, s), = successors(g, g.initial_state())
    assert g.is_violation(s) and "runtime error" in step.label


def test_byte_increment_wraps_in_a_run():
    g = build_fpg(parse("byte x = 255; init { x++; assert(x == 0) }"))
    assert check(g, ASSERT).satisfied


# -- successors -----------------------------------------------------------------------


def test_simple_initial_state_has_two_successors(corpus):
    g = build_fpg(substitute(corpus["simple"], {1: 2}))
    assert [st.label for st, _ in successors(g, g.initial_state())] == ["break", "x = x + 1"]


def test_terminal_state_stutters():
    g = build_fpg(parse("byte x = 1; init { assert(x == 1) }"))
    (_, s), = successors(g, g.initial_state())
    (step, t), = successors(g, s)
    assert t == s and step.sid == () and step.pre == step.post and step.delta == fx.TRUE


def test_abstract_simple_hole_state_has_eight_successors(corpus):
    g = build_fpg(abstract_join(rewrite_holes(corpus["simple"], 3)))
    _, s = successors(g, g.initial_state())[0]
    nxt = successors(g, s)
    assert len(nxt) == 8
    assert [st.delta for st, _ in nxt] == [fx.eq("A", v) for v in range(8)]


def test_channel_blocks_when_full():
    g = build_fpg(parse("chan c = [1] of { byte }; init { c!1; c!2 }"))
    (_, s), = successors(g, g.initial_state())
    (step, t), = successors(g, s)
    assert step.sid == () and t == s


def test_channel_fifo_order():
    m = parse("chan c = [2] of { byte }; byte x, y; init { c!1; c!2; c?x; c?y; assert(x == 1 && y == 2) }")
    assert check(m, ASSERT).satisfied


def test_else_is_taken_only_when_nothing_else_is_enabled():
    m = parse("byte x; init { if :: (x == 1) -> skip :: else -> x = 7 fi; assert(x == 7) }")
    assert check(m, ASSERT).satisfied
    m = parse("byte x = 1; init { if :: (x == 1) -> skip :: else -> x = 7 fi; assert(x == 1) }")
    assert check(m, ASSERT).satisfied


def test_digest_is_stable():
    g = build_fpg(parse("byte x; init { skip }"))
    assert digest(g.initial_state()) == digest(g.initial_state())
    assert 0 <= digest(g.initial_state()) < 2**64


# -- project_config -----------------------------------------------------------------


def test_project_config_keeps_one_hole_transition(corpus):
    fam = rewrite_holes(corpus["simple"], 3)
    g = project_config(build_fpg(fam.model), fam.space.config(A=2))
    hole = [t for t in g.transitions if t.label.startswith("y =")]
    assert [t.label for t in hole] == ["y = 2 * x"]
    assert all(t.delta == fx.TRUE for t in g.transitions)


def test_project_config_on_plain_model_is_identity(corpus):
    m = substitute(corpus["simple"], {1: 1})
    g = build_fpg(m)
    h = project_config(g, fx.ConfigSpace().config())
    assert [(t.src, t.dst, t.label) for t in h.transitions] == \
        [(t.src, t.dst, t.label) for t in g.transitions]


def test_project_config_loop_matches_substitution(corpus):
    fam = rewrite_holes(corpus["loop"], 3)
    g = project_config(build_fpg(fam.model), fam.space.config(A=5))
    labels = {t.label for t in g.transitions}
    assert "(x > 5)" in labels and "(x > 4)" not in labels
    assert summary(g) == summary(build_fpg(substitute(corpus["loop"], {1: 5})))


# -- properties ----------------------------------------------------------------------


@settings(max_examples=50)
@given(plain_models())
def test_every_reachable_state_has_a_successor(text):
    g = build_fpg(parse(text))
    for s in reachable_states(g):
        assert successors(g, s)


@settings(max_examples=50)
@given(plain_models())
def test_successors_are_deterministic(text):
    g1, g2 = build_fpg(parse(text)), build_fpg(parse(text))
    for s in reachable_states(g1):
        assert successors(g1, s) == successors(g2, s)


@settings(max_examples=60)
@given(st.data())
def test_graph_and_source_projection_agree(data):
    fam = family_of(parse(data.draw(any_families())))
    psi = data.draw(featexps(fam.space, depth=2))
    sub = project(fam, psi)
    if sub.space.is_empty():
        return
    graph_level = project_space(build_fpg(fam.model), sub.space)
    source_level = build_fpg(abstract_join(sub))
    assert summary(graph_level) == summary(source_level)


@settings(max_examples=40)
@given(any_families())
def test_single_config_projection_commutes(text):
    fam = family_of(parse(text))
    g = build_fpg(fam.model)
    for k in fam.space.members():
        graph_level = project_config(g, k)
        source_level = build_fpg(abstract_join(project(fam, characteristic(k))))
        assert summary(graph_level) == summary(source_level)
