from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchsynth import featexp as fx
from sketchsynth.checker import (
    ASSERT, CheckerError, StateCapExceeded, check, checker_calls, feat_exp_of, format_trace,
    replay, resolve_property, trace_from_dict, trace_to_dict,
)
from sketchsynth.graph import Step, Trace, build_fpg, project_config
from sketchsynth.lang import parse
from sketchsynth.lang.ast import LConst, LtlProp
from sketchsynth.ltl import ltl_to_buchi
from sketchsynth.transform import (
    abstract_join, characteristic, family_of, project, rewrite_holes, substitute,
)

from conftest import ALL_SKETCHES
from generators import any_families, model_ltl_formulas, plain_models
from oracles import ltl_scc_oracle, safety_oracle


def step(delta):
    return Step(0, (1,), delta, 0)


# -- check ---------------------------------------------------------------------------


def test_abstract_simple_is_violated_by_a_large_multiplier(corpus):
    fam = rewrite_holes(corpus["simple"], 3)
    r = check(abstract_join(fam), ASSERT)
    assert not r.satisfied and r.kind == "safety" and r.trace.cycle == ()
    psi = feat_exp_of(r.trace)
    assert fx.is_literal(psi) and psi.feature == "A" and psi.const >= 3


def test_projected_simple_is_satisfied(corpus):
    fam = project(rewrite_holes(corpus["simple"], 3), fx.lt("A", 3))
    assert check(abstract_join(fam), ASSERT).satisfied


def test_skip_satisfies_always_true():
    m = parse("init { skip }")
    r = check(m, LtlProp("t", LConst(True)))
    assert r.satisfied and r.trace is None


def test_liveness_violation_is_a_lasso():
    m = parse("byte x; init { do :: x = 1 :: x = 0 od } ltl p { <> [] (x == 1) }")
    r = check(m, "p")
    assert not r.satisfied and r.kind == "liveness" and r.trace.cycle
    assert replay(build_fpg(m), r.trace)


def test_ltl_holds_on_terminating_run():
    m = parse("byte x; init { x = 1 } ltl p { <> (x == 1) }")
    assert check(m, "p").satisfied


def test_ltl_reads_the_initial_state():
    m = parse("byte x = 1; init { x = 0 } ltl p { x == 1 }")
    assert check(m, "p").satisfied
    m = parse("byte x = 0; init { x = 1 } ltl p { x == 1 }")
    assert not check(m, "p").satisfied


def test_no_fairness_is_assumed():
    m = parse("byte x; init { do :: skip od } active proctype q() { x = 1 } ltl p { <> (x == 1) }")
    assert not check(m, "p").satisfied


def test_check_rejects_families(corpus):
    with pytest.raises(CheckerError, match="#if"):
        check(rewrite_holes(corpus["simple"], 3).model, ASSERT)


def test_state_cap_is_a_resource_error(corpus):
    m = substitute(corpus["simple"], {1: 1})
    with pytest.raises(StateCapExceeded) as info:
        check(m, ASSERT, state_cap=10)
    assert info.value.cap == 10


def test_every_call_is_counted():
    before = checker_calls()
    m = parse("init { skip }")
    check(m, ASSERT)
    check(m, ASSERT)
    assert checker_calls() == before + 2


def test_resolve_property_defaults(corpus):
    assert resolve_property(corpus["simple"], None) is ASSERT
    assert resolve_property(corpus["salesman"], None).name == "p"
    assert resolve_property(corpus["salesman"], "assert") is ASSERT
    with pytest.raises(KeyError):
        resolve_property(corpus["salesman"], "nope")


# -- feat_exp_of ------------------------------------------------------------------------


def test_feat_exp_of_collapses_duplicates():
    t = Trace(tuple(step(d) for d in [fx.TRUE, fx.eq("A", 3), fx.TRUE, fx.eq("A", 3)]))
    assert feat_exp_of(t) == fx.eq("A", 3)


def test_feat_exp_of_keeps_contradictions():
    t = Trace((step(fx.eq("A", 3)), step(fx.eq("A", 5))))
    assert feat_exp_of(t) == fx.And(fx.eq("A", 3), fx.eq("A", 5))


def test_simple_first_counterexample_is_genuine_for_all_its_variants(corpus):
    fam = rewrite_holes(corpus["simple"], 3)
    psi = feat_exp_of(check(abstract_join(fam), ASSERT).trace)
    variants = [k for k in fam.space.members() if fx.evaluate(psi, k)]
    assert variants
    for k in variants:
        assert not check(substitute(corpus["simple"], fam.assignment_of(k)), ASSERT).satisfied


# -- trace output -----------------------------------------------------------------------


def test_format_trace_lines(corpus):
    r = check(abstract_join(rewrite_holes(corpus["simple"], 3)), ASSERT)
    text = format_trace(r.trace)
    lines = text.strip().splitlines()
    assert len(lines) == len(r.trace.stem)
    assert all(" @ " in ln and " -> " in ln for ln in lines)


def test_trace_dict_round_trip():
    m = parse("byte x; init { do :: x = 1 :: x = 0 od } ltl p { <> [] (x == 1) }")
    t = check(m, "p").trace
    assert trace_from_dict(trace_to_dict(t)) == t


# -- cross-validation ---------------------------------------------------------------------


@pytest.mark.parametrize("name", ALL_SKETCHES)
def test_corpus_verdicts_match_oracles(corpus, name):
    sketch = corpus[name]
    fam = rewrite_holes(sketch, 2)
    prop = resolve_property(fam.model, None)
    for k in fam.space.members():
        g = build_fpg(substitute(sketch, fam.assignment_of(k), 2))
        r = check(g, prop)
        if prop is ASSERT:
            assert r.satisfied == safety_oracle(g)
        else:
            assert r.satisfied == ltl_scc_oracle(g, ltl_to_buchi(prop))
        if not r.satisfied:
            assert replay(g, r.trace)


@settings(max_examples=60)
@given(plain_models())
def test_safety_matches_bfs_oracle(text):
    g = build_fpg(parse(text))
    r = check(g, ASSERT)
    assert r.satisfied == safety_oracle(g)
    if not r.satisfied:
        assert not r.trace.cycle and replay(g, r.trace)


@settings(max_examples=60)
@given(plain_models(), model_ltl_formulas(depth=3))
def test_ltl_matches_scc_oracle(text, f):
    g = build_fpg(parse(text))
    prop = LtlProp("p", f)
    r = check(g, prop)
    assert r.satisfied == ltl_scc_oracle(g, ltl_to_buchi(prop))
    if not r.satisfied:
        assert r.trace.cycle and replay(g, r.trace)


@settings(max_examples=60)
@given(any_families())
def test_counterexamples_are_genuine_for_matching_configs(text):
    fam = family_of(parse(text))
    r = check(abstract_join(fam), ASSERT)
    if r.satisfied:
        return
    psi = feat_exp_of(r.trace)
    g = build_fpg(fam.model)
    for k in fam.space.members():
        if fx.evaluate(psi, k):
            assert replay(project_config(g, k), r.trace)


@settings(max_examples=60)
@given(any_families(), st.one_of(st.none(), model_ltl_formulas(depth=2)))
def test_abstract_satisfaction_carries_to_every_variant(text, f):
    fam = family_of(parse(text))
    prop = ASSERT if f is None else LtlProp("p", f)
    if not check(abstract_join(fam), prop).satisfied:
        return
    for k in fam.space.members():
        assert check(abstract_join(project(fam, characteristic(k))), prop).satisfied
