"""Explicit-state verification of plain models.

Assertions are checked by depth-first reachability of a violation location.
LTL properties are checked by nested depth-first search over the product of
the program graph with a Büchi automaton for the negated property.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional, Union

from . import featexp as fx
from .graph import (
    EvalError, FeaturedProgramGraph, Scope, State, Step, Trace, build_fpg, compile_expr, digest,
    successors,
)
from .lang.ast import IfDef, LtlProp, Model
from .lang.desugar import walk_stmts
from .ltl import BuchiAutomaton, ltl_to_buchi


class CheckerError(Exception):
    pass


class StateCapExceeded(CheckerError):
    """The explored state space grew beyond the configured budget."""

    def __init__(self, cap: int):
        super().__init__(f"state cap of {cap} states exceeded")
        self.cap = cap


class AssertMode:
    """Marker selecting assertion checking instead of an LTL property."""

    def __repr__(self) -> str:
        return "ASSERT"


ASSERT = AssertMode()
Property = Union[AssertMode, LtlProp]


@dataclass(frozen=True)
class VerifyResult:
    satisfied: bool
    trace: Optional[Trace] = None
    kind: Optional[str] = None  # "safety" | "liveness"
    states: int = 0

    def __bool__(self) -> bool:
        return self.satisfied


class _Counter:
    def __init__(self) -> None:
        self._n = 0
        self._lock = threading.Lock()

    def increment(self) -> None:
        with self._lock:
            self._n += 1

    @property
    def value(self) -> int:
        return self._n


CALLS = _Counter()


def checker_calls() -> int:
    """Total number of ``check`` invocations in this process."""
    return CALLS.value


def resolve_property(m: Model, prop: Union[Property, str, None]) -> Property:
    """``None`` picks the first ltl property of ``m`` if any, else assertions."""
    if prop is None:
        return m.props[0] if m.props else ASSERT
    if isinstance(prop, str):
        return ASSERT if prop == "assert" else m.prop(prop)
    return prop


def check(m: Union[Model, FeaturedProgramGraph], prop: Union[Property, str, None] = ASSERT,
          state_cap: Optional[int] = None) -> VerifyResult:
    """Verify a plain model (or an already built graph) against ``prop``."""
    CALLS.increment()
    if isinstance(m, Model):
        for p in m.processes:
            if any(isinstance(s, IfDef) for s in walk_stmts(p.body)):
                raise CheckerError("model still contains #if blocks; abstract or project it first")
        if isinstance(prop, (str, type(None))):
            prop = resolve_property(m, prop)
        g = build_fpg(m)
    else:
        g = m
        if isinstance(prop, str) or prop is None:
            raise CheckerError("a property object is required when checking a graph")
    if isinstance(prop, AssertMode):
        return _check_safety(g, state_cap)
    return _check_ltl(g, ltl_to_buchi(prop), state_cap)


def _check_safety(g: FeaturedProgramGraph, cap: Optional[int]) -> VerifyResult:
    init = g.initial_state()
    if g.is_violation(init):
        return VerifyResult(False, Trace(()), "safety", 1)
    seen = {init}
    stack = [iter(successors(g, init))]
    path: list[Step] = []
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            if path:
                path.pop()
            continue
        step, t = nxt
        if t in seen:
            continue
        seen.add(t)
        if cap is not None and len(seen) > cap:
            raise StateCapExceeded(cap)
        path.append(step)
        if g.is_violation(t):
            return VerifyResult(False, Trace(tuple(path)), "safety", len(seen))
        stack.append(iter(successors(g, t)))
    return VerifyResult(True, states=len(seen))


class _Product:
    def __init__(self, g: FeaturedProgramGraph, aut: BuchiAutomaton):
        self.g = g
        self.aut = aut
        scope = Scope(g.layout, None)
        self.atoms = [compile_expr(e, scope) for e in aut.atoms]
        self._labels: dict[State, tuple[bool, ...]] = {}
        self._succ: dict[State, list[tuple[Step, State]]] = {}

    def valuation(self, s: State) -> tuple[bool, ...]:
        v = self._labels.get(s)
        if v is None:
            v = tuple(_holds(a, s) for a in self.atoms)
            self._labels[s] = v
        return v

    def initial(self) -> list[tuple[State, int]]:
        s0 = self.g.initial_state()
        val = self.valuation(s0)
        return [(s0, q) for q in self.aut.initial if self.aut.admits(q, val)]

    def successors(self, ps: tuple[State, int]) -> list[tuple[Step, tuple[State, int]]]:
        s, q = ps
        model = self._succ.get(s)
        if model is None:
            model = successors(self.g, s)
            self._succ[s] = model
        out = []
        for step, t in model:
            val = self.valuation(t)
            for r in self.aut.succ[q]:
                if self.aut.admits(r, val):
                    out.append((step, (t, r)))
        return out


def _holds(atom, s: State) -> bool:
    try:
        return bool(atom(s[1], s[2]))
    except EvalError:
        return False


def _check_ltl(g: FeaturedProgramGraph, aut: BuchiAutomaton, cap: Optional[int]) -> VerifyResult:
    prod = _Product(g, aut)
    blue: set = set()
    red: set = set()
    for root in prod.initial():
        if root in blue:
            continue
        blue.add(root)
        on_stack = {root: 0}
        states = [root]
        steps: list[Step] = []
        stack = [iter(prod.successors(root))]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is not None:
                step, t = nxt
                if t not in blue:
                    blue.add(t)
                    if cap is not None and len(blue) > cap:
                        raise StateCapExceeded(cap)
                    on_stack[t] = len(states)
                    states.append(t)
                    steps.append(step)
                    stack.append(iter(prod.successors(t)))
                continue
            s = states[-1]
            if s[1] in aut.accepting:
                found = _red_search(prod, s, on_stack, red)
                if found is not None:
                    j, red_steps = found
                    top = len(states) - 1
                    trace = Trace(tuple(steps[:j]), tuple(steps[j:top]) + tuple(red_steps))
                    return VerifyResult(False, trace, "liveness", len(blue))
            stack.pop()
            states.pop()
            del on_stack[s]
            if steps:
                steps.pop()
    return VerifyResult(True, states=len(blue))


def _red_search(prod: _Product, seed, on_stack: dict, red: set):
    """Second-phase search from an accepting seed; hitting the first-phase
    stack closes an accepting cycle."""
    path: list[Step] = []
    stack = [iter(prod.successors(seed))]
    red.add(seed)
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            if path:
                path.pop()
            continue
        step, t = nxt
        if t in on_stack:
            return on_stack[t], path + [step]
        if t not in red:
            red.add(t)
            path.append(step)
            stack.append(iter(prod.successors(t)))
    return None


# ---------------------------------------------------------------------------


def feat_exp_of(t: Trace) -> fx.FeatExp:
    """Conjunction of the presence conditions met along a trace."""
    parts: list[fx.FeatExp] = []
    for step in t.steps:
        for c in fx.conjuncts(step.delta):
            if c != fx.TRUE and c not in parts:
                parts.append(c)
    return fx.conj(parts)


def replay(g: FeaturedProgramGraph, t: Trace) -> bool:
    """Whether ``t`` can be executed step by step in ``g`` from its initial state."""
    s = g.initial_state()
    start: Optional[State] = None
    for i, step in enumerate(t.steps):
        if i == len(t.stem):
            start = s
        if step.pre != digest(s):
            return False
        for cand, nxt in successors(g, s):
            if cand.sid == step.sid and cand.post == step.post:
                s = nxt
                break
        else:
            return False
    if t.cycle:
        return start is not None and digest(start) == digest(s)
    return True


def render_sid(sid: tuple[int, ...]) -> str:
    return ".".join(str(i) for i in sid) if sid else "stutter"


def format_trace(t: Trace) -> str:
    """One line per step: ``sid @ delta : pre -> post``."""
    def line(s: Step) -> str:
        return f"{render_sid(s.sid)} @ {fx.render(s.delta)} : {s.pre:016x} -> {s.post:016x}  # {s.label}"

    out = [line(s) for s in t.stem]
    if t.cycle:
        out.append("-- cycle --")
        out.extend(line(s) for s in t.cycle)
    return "\n".join(out) + "\n"


def trace_to_dict(t: Trace) -> dict:
    def step(s: Step) -> dict:
        return {"sid": list(s.sid), "delta": fx.render(s.delta), "pre": f"{s.pre:016x}",
                "post": f"{s.post:016x}", "proc": s.proc, "label": s.label}

    return {"stem": [step(s) for s in t.stem], "cycle": [step(s) for s in t.cycle]}


def trace_from_dict(d: dict) -> Trace:
    def step(x: dict) -> Step:
        return Step(int(x["pre"], 16), tuple(x["sid"]), fx.parse(x["delta"]), int(x["post"], 16),
                    x.get("proc", -1), x.get("label", ""))

    return Trace(tuple(step(x) for x in d["stem"]), tuple(step(x) for x in d["cycle"]))
