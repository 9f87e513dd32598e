"""Abstraction refinement over model families, and the enumeration baseline."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Union

from . import featexp as fx
from .checker import (
    ASSERT, AssertMode, CheckerError, Property, check, feat_exp_of, resolve_property,
    trace_from_dict, trace_to_dict,
)
from .graph import Trace
from .lang.ast import Model
from .transform import FamilyModel, abstract_join, project, rewrite_holes, substitute

MODES = ("first-found", "all")
SCHEMA = 1


class ProgressError(AssertionError):
    """A refinement step failed to shrink the configuration space."""


@dataclass
class SynthesisReport:
    method: str  # "arp" | "brute"
    mode: str
    property: str
    space: fx.ConfigSpace
    correct: tuple[fx.Box, ...] = ()
    incorrect: tuple[tuple[fx.FeatExp, Trace], ...] = ()
    spurious_refinements: int = 0
    checker_calls: int = 0
    recursion_depth: int = 0
    wall_time: float = 0.0
    holes: dict[int, str] = field(default_factory=dict)

    @property
    def correct_exp(self) -> fx.FeatExp:
        return fx.boxes_to_featexp(self.space, self.correct)

    def correct_configs(self) -> set[fx.Config]:
        return {k for k in self.space.members() if self.is_correct(k)}

    def is_correct(self, k: fx.Config) -> bool:
        return any(all(lo <= k[f.name] <= hi for f, (lo, hi) in zip(self.space.features, box))
                   for box in self.correct)

    def box_dicts(self) -> list[dict[str, list[int]]]:
        return [{f.name: [lo, hi] for f, (lo, hi) in zip(self.space.features, b)}
                for b in self.correct]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "method": self.method,
            "mode": self.mode,
            "property": self.property,
            "features": [{"name": f.name, "lo": f.lo, "hi": f.hi} for f in self.space.features],
            "validity": fx.render(self.space.validity),
            "space_size": self.space.size,
            "holes": {str(k): v for k, v in self.holes.items()},
            "correct": self.box_dicts(),
            "correct_expr": fx.render(self.correct_exp),
            "incorrect": [{"expr": fx.render(psi), "trace": trace_to_dict(t)}
                          for psi, t in self.incorrect],
            "spurious_refinements": self.spurious_refinements,
            "checker_calls": self.checker_calls,
            "recursion_depth": self.recursion_depth,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        decls = tuple(fx.FeatureDecl(f["name"], f["lo"], f["hi"]) for f in d["features"])
        space = fx.ConfigSpace(decls, fx.parse(d["validity"]))
        correct = tuple(tuple(tuple(b[f.name]) for f in decls) for b in d["correct"])
        incorrect = tuple((fx.parse(x["expr"]), trace_from_dict(x["trace"])) for x in d["incorrect"])
        return cls(d["method"], d["mode"], d["property"], space, correct, incorrect,
                   d["spurious_refinements"], d["checker_calls"], d["recursion_depth"],
                   d["wall_time"], {int(k): v for k, v in d.get("holes", {}).items()})


def _annotate(err: CheckerError, where: str) -> None:
    err.subfamily = where
    err.args = (f"{err.args[0]} (while checking {where})",) + err.args[1:]


def _prop_name(prop: Property) -> str:
    return "assert" if isinstance(prop, AssertMode) else prop.name


def _boxes(space: fx.ConfigSpace, parts: list[fx.FeatExp]) -> tuple[fx.Box, ...]:
    return tuple(fx.to_boxes(space, fx.disj(parts)))


def arp(fam: FamilyModel, space: Optional[fx.ConfigSpace] = None, prop: Property = ASSERT,
        mode: str = "first-found", state_cap: Optional[int] = None) -> SynthesisReport:
    """Classify the configurations of ``space`` by abstraction refinement.

    In ``first-found`` mode the search stops at the first sub-family whose
    abstraction satisfies ``prop``; in ``all`` mode every configuration ends
    up either in a verified sub-family or in a refuted one.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    root = fam.space if space is None else space
    if root.is_empty():
        raise ValueError("configuration space is empty")
    start = time.perf_counter()
    correct: list[fx.FeatExp] = []
    incorrect: list[tuple[fx.FeatExp, Trace]] = []
    calls = spurious = depth = 0
    done = False
    work: list[tuple[fx.ConfigSpace, int]] = [(root, 1)]
    while work and not done:
        sp, level = work.pop()
        depth = max(depth, level)
        try:
            result = check(abstract_join(project(fam, sp.validity)), prop, state_cap)
        except CheckerError as err:
            _annotate(err, f"sub-family {fx.render(sp.validity)}")
            raise
        calls += 1
        if result.satisfied:
            correct.append(sp.validity)
            done = mode == "first-found"
            continue
        psi = feat_exp_of(result.trace)
        if fx.alpha_join(sp, psi):
            incorrect.append((fx.simplify(fx.And(psi, sp.validity)), result.trace))
            children = [sp.restrict(b) for b in fx.split(sp, fx.Not(psi))]
        else:
            spurious += 1
            cut = fx.interpolate(sp, psi)
            children = [sp.restrict(cut), sp.restrict(fx.Not(cut))]
        children = [c for c in children if not c.is_empty()]
        for c in children:
            if c.size >= sp.size:
                raise ProgressError(
                    f"sub-family {fx.render(c.validity)} does not shrink {fx.render(sp.validity)}")
        work.extend((c, level + 1) for c in reversed(children))
    return SynthesisReport(
        "arp", mode, _prop_name(prop), root, _boxes(root, correct), tuple(incorrect), spurious,
        calls, depth, time.perf_counter() - start, {h.id: h.feature for h in fam.holes})


def synthesize(sketch: Model, prop: Union[Property, str, None] = None, bits: int = 3,
               mode: str = "first-found", state_cap: Optional[int] = None) -> SynthesisReport:
    """Rewrite the holes of ``sketch`` into features and run :func:`arp`."""
    fam = rewrite_holes(sketch, bits)
    return arp(fam, fam.space, resolve_property(fam.model, prop), mode, state_cap)


def brute_force(sketch: Model, prop: Union[Property, str, None] = None, bits: int = 3,
                state_cap: Optional[int] = None) -> SynthesisReport:
    """Check every completion of ``sketch`` one at a time."""
    fam = rewrite_holes(sketch, bits)
    prop = resolve_property(fam.model, prop)
    start = time.perf_counter()
    correct: list[fx.FeatExp] = []
    incorrect: list[tuple[fx.FeatExp, Trace]] = []
    calls = 0
    for k in fam.space.members():
        variant = substitute(sketch, fam.assignment_of(k), bits)
        try:
            result = check(variant, prop, state_cap)
        except CheckerError as err:
            _annotate(err, f"completion {k}")
            raise
        calls += 1
        if result.satisfied:
            correct.append(k.formula())
        else:
            incorrect.append((k.formula(), result.trace))
    return SynthesisReport(
        "brute", "all", _prop_name(prop), fam.space, _boxes(fam.space, correct), tuple(incorrect),
        0, calls, 0, time.perf_counter() - start, {h.id: h.feature for h in fam.holes})
