from __future__ import annotations

import pytest
from hypothesis import given, settings

from sketchsynth import featexp as fx
from sketchsynth.arp import ProgressError, SynthesisReport, arp, brute_force, synthesize
from sketchsynth.checker import ASSERT, StateCapExceeded, check, feat_exp_of, replay
from sketchsynth.graph import build_fpg, project_config
from sketchsynth.lang import parse
from sketchsynth.transform import (
    abstract_join, characteristic, family_of, project,
)

from generators import any_families

SPURIOUS = """feature A : 0 .. 3; byte x;
init {
    #if :: (A=0) -> x = 1 #endif;
    #if :: (A=1) -> assert(x != 1) #endif
}
"""


def values(report):
    return sorted(k["A"] for k in report.correct_configs())


def oracle(fam, prop=ASSERT):
    """Correct configurations of a family, one single-variant check each."""
    return {k for k in fam.space.members()
            if check(abstract_join(project(fam, characteristic(k))), prop).satisfied}


# -- examples --------------------------------------------------------------------------


def test_simple_first_found(corpus):
    r = synthesize(corpus["simple"], bits=3)
    assert r.box_dicts() == [{"A": [0, 2]}]
    assert r.checker_calls == 2


def test_loop_first_found(corpus):
    r = synthesize(corpus["loop"], bits=3)
    assert values(r) == [5, 6, 7]
    # search-order dependent; bounded by twice the reference count of 4
    assert r.checker_calls <= 8


def test_loopcond_first_found(corpus):
    r = synthesize(corpus["loopcond"], bits=3)
    assert values(r) == [0, 1]
    assert r.checker_calls == 2


def test_simple_all_mode(corpus):
    r = synthesize(corpus["simple"], bits=3, mode="all")
    assert values(r) == [0, 1, 2]
    covered = set(r.correct_configs())
    for psi, _ in r.incorrect:
        part = {k for k in r.space.members() if fx.evaluate(psi, k)}
        assert not part & covered
        covered |= part
    assert covered == set(r.space.members())


def test_hole_free_model_is_one_call():
    r = synthesize(parse("byte x; init { x = 1; assert(x == 1) }"))
    assert r.space.size == 1 and r.checker_calls == 1
    assert r.correct == ((),)


def test_welfare_matches_brute_force(corpus):
    ours = synthesize(corpus["welfare"], bits=3, mode="all")
    ref = brute_force(corpus["welfare"], bits=3)
    assert ours.correct_configs() == ref.correct_configs()
    assert values(ref) == [6]


@pytest.mark.parametrize("bits,calls", [(3, 8), (4, 16), (8, 256)])
def test_brute_force_call_counts(corpus, bits, calls):
    r = brute_force(corpus["simple"], bits=bits)
    assert r.checker_calls == calls
    assert values(r) == [0, 1, 2]


def test_empty_correct_has_no_solution(corpus):
    r = synthesize(corpus["empty_correct"], bits=3)
    assert r.correct == () and r.checker_calls <= 8


def test_first_found_stops_early_in_salesman(corpus):
    r = synthesize(corpus["salesman"], bits=3)
    ref = brute_force(corpus["salesman"], bits=3)
    assert r.correct_configs() <= ref.correct_configs() and r.correct
    assert r.checker_calls <= 4


# -- spurious counterexamples --------------------------------------------------------------


def test_spurious_trace_is_refined_away():
    fam = family_of(parse(SPURIOUS))
    r = check(abstract_join(fam), ASSERT)
    psi = feat_exp_of(r.trace)
    assert not fx.alpha_join(fam.space, psi)
    cut = fx.interpolate(fam.space, psi)
    for half in (fam.space.restrict(cut), fam.space.restrict(fx.Not(cut))):
        assert not fx.alpha_join(half, psi)


def test_arp_counts_spurious_refinements():
    fam = family_of(parse(SPURIOUS))
    r = arp(fam, mode="all")
    assert r.spurious_refinements >= 1
    assert r.correct_configs() == oracle(fam) == set(fam.space.members())


# -- report ------------------------------------------------------------------------------


def test_report_round_trip(corpus):
    r = synthesize(corpus["simple"], bits=3, mode="all")
    back = SynthesisReport.from_dict(r.to_dict())
    assert back.to_dict() == r.to_dict()


def test_report_rejects_unknown_schema(corpus):
    d = synthesize(corpus["simple"], bits=3).to_dict()
    d["schema"] = 99
    with pytest.raises(ValueError, match="schema"):
        SynthesisReport.from_dict(d)


def test_unknown_mode_is_rejected(corpus):
    with pytest.raises(ValueError, match="mode"):
        synthesize(corpus["simple"], mode="some")


def test_state_cap_names_the_subfamily(corpus):
    with pytest.raises(StateCapExceeded) as info:
        synthesize(corpus["simple"], state_cap=5)
    assert "sub-family" in str(info.value) and info.value.subfamily


def test_progress_error_is_an_assertion():
    assert issubclass(ProgressError, AssertionError)


# -- properties ----------------------------------------------------------------------------


@settings(max_examples=60)
@given(any_families())
def test_all_mode_matches_enumeration(text):
    fam = family_of(parse(text))
    r = arp(fam, mode="all")
    assert r.correct_configs() == oracle(fam)
    assert r.recursion_depth <= fam.space.size
    assert r.checker_calls <= 2 * fam.space.size


@settings(max_examples=60)
@given(any_families())
def test_first_found_is_sound(text):
    fam = family_of(parse(text))
    r = arp(fam, mode="first-found")
    ref = oracle(fam)
    assert r.correct_configs() <= ref
    assert bool(r.correct) == bool(ref)


@settings(max_examples=60)
@given(any_families())
def test_incorrect_witnesses_are_genuine(text):
    fam = family_of(parse(text))
    g = build_fpg(fam.model)
    r = arp(fam, mode="all")
    for psi, trace in r.incorrect:
        ks = [k for k in fam.space.members() if fx.evaluate(psi, k)]
        assert ks
        for k in ks:
            assert replay(project_config(g, k), trace)


@settings(max_examples=60)
@given(any_families())
def test_refinement_removes_spurious_traces_from_both_halves(text):
    fam = family_of(parse(text))
    r = check(abstract_join(fam), ASSERT)
    if r.satisfied:
        return
    psi = feat_exp_of(r.trace)
    if fx.alpha_join(fam.space, psi):
        return
    cut = fx.interpolate(fam.space, psi)
    for half in (fam.space.restrict(cut), fam.space.restrict(fx.Not(cut))):
        assert half.size < fam.space.size
        assert not fx.alpha_join(half, psi)
