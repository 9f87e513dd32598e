"""Featured program graphs and their unfolding into transition-system states.

A state is the triple ``(locations, values, channels)``: one control location
per process, a flat tuple of every variable slot (globals first, then each
process's locals, arrays laid out element by element) and one tuple of queued
messages per channel.  States are plain tuples, so the visited sets of the
checker are exact.

Digests are the first 8 bytes (little endian) of BLAKE2b over the canonical
serialization ``"L" + locs + "V" + values + "C" + (len, items)*``, each integer
packed as signed 64-bit little endian.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import featexp as fx
from .lang.ast import (
    IFDEF_SKIP_TAG, TYPE_RANGES, Assert, Assign, BinOp, BoolLit, Break, Call, ChanDecl, ChanOp, Do, Else,
    Expr, ExprStmt, Hole, If, IfDef, Index, InlineCall, JoinIf, Model, Num, Recv, Select, Send,
    Seq, Sid, Skip, Stmt, UnOp, Var, VarDecl,
)
from .lang.render import render_expr

State = tuple  # (locs, vals, chans)


class GraphError(Exception):
    """Raised when a model cannot be compiled (undeclared storage, holes...)."""


class EvalError(Exception):
    """Runtime defect: division by zero or out-of-bounds array access."""


def apply_binop(op: str, a: int, b: int) -> int:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op in ("/", "%"):
        if b == 0:
            raise ZeroDivisionError
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        return q if op == "/" else a - q * b
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "&&":
        return int(bool(a) and bool(b))
    if op == "||":
        return int(bool(a) or bool(b))
    raise ValueError(f"unknown operator {op}")


def wrap(typ: str, v: int) -> int:
    if typ in ("bit", "bool"):
        return 1 if v else 0
    if typ == "byte":
        return v & 0xFF
    if typ == "short":
        v &= 0xFFFF
        return v - 0x10000 if v >= 0x8000 else v
    v &= 0xFFFFFFFF
    return v - 0x100000000 if v >= 0x80000000 else v


# ---------------------------------------------------------------------------
# Storage layout and expression compilation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Slot:
    base: int
    type: str
    size: Optional[int]  # None for scalars


@dataclass
class Layout:
    slots: dict[str, Slot] = field(default_factory=dict)  # globals
    local_slots: list[dict[str, Slot]] = field(default_factory=list)
    chans: dict[str, int] = field(default_factory=dict)
    chan_caps: list[int] = field(default_factory=list)
    chan_types: list[str] = field(default_factory=list)
    init_vals: list[int] = field(default_factory=list)
    slot_names: list[str] = field(default_factory=list)

    def add(self, scope: dict[str, Slot], d: VarDecl, prefix: str = "") -> None:
        if d.type not in TYPE_RANGES:
            raise GraphError(f"unknown type {d.type}")
        base = len(self.init_vals)
        n = d.size or 1
        self.init_vals.extend([wrap(d.type, d.init)] * n)
        if d.size is None:
            self.slot_names.append(prefix + d.name)
        else:
            self.slot_names.extend(f"{prefix}{d.name}[{i}]" for i in range(n))
        scope[d.name] = Slot(base, d.type, d.size)


Evaluator = Callable[[tuple, tuple], int]


class Scope:
    def __init__(self, layout: Layout, proc: Optional[int]):
        self.layout = layout
        self.locals = layout.local_slots[proc] if proc is not None else {}

    def slot(self, name: str) -> Slot:
        if name in self.locals:
            return self.locals[name]
        if name in self.layout.slots:
            return self.layout.slots[name]
        raise GraphError(f"use of undeclared variable {name!r}")

    def chan(self, name: str) -> int:
        if name not in self.layout.chans:
            raise GraphError(f"use of undeclared channel {name!r}")
        return self.layout.chans[name]


def compile_expr(e: Expr, scope: Scope) -> Evaluator:
    if isinstance(e, Num):
        v = e.value
        return lambda vals, chans: v
    if isinstance(e, BoolLit):
        v = int(e.value)
        return lambda vals, chans: v
    if isinstance(e, Var):
        s = scope.slot(e.name)
        if s.size is not None:
            raise GraphError(f"array {e.name} used without an index")
        i = s.base
        return lambda vals, chans: vals[i]
    if isinstance(e, Index):
        s = scope.slot(e.name)
        if s.size is None:
            raise GraphError(f"{e.name} is not an array")
        idx = compile_expr(e.index, scope)
        base, size, name = s.base, s.size, e.name

        def read(vals: tuple, chans: tuple) -> int:
            k = idx(vals, chans)
            if not 0 <= k < size:
                raise EvalError(f"index {k} out of bounds for {name}[{size}]")
            return vals[base + k]

        return read
    if isinstance(e, UnOp):
        a = compile_expr(e.arg, scope)
        if e.op == "-":
            return lambda vals, chans: -a(vals, chans)
        return lambda vals, chans: int(not a(vals, chans))
    if isinstance(e, BinOp):
        a, b = compile_expr(e.left, scope), compile_expr(e.right, scope)
        op = e.op
        if op == "&&":
            return lambda vals, chans: int(bool(a(vals, chans)) and bool(b(vals, chans)))
        if op == "||":
            return lambda vals, chans: int(bool(a(vals, chans)) or bool(b(vals, chans)))

        def binop(vals: tuple, chans: tuple) -> int:
            try:
                return apply_binop(op, a(vals, chans), b(vals, chans))
            except ZeroDivisionError:
                raise EvalError(f"division by zero in {render_expr(e)}") from None

        return binop
    if isinstance(e, ChanOp):
        c = scope.chan(e.chan)
        cap = scope.layout.chan_caps[c]
        if e.op == "len":
            return lambda vals, chans: len(chans[c])
        if e.op == "empty":
            return lambda vals, chans: int(len(chans[c]) == 0)
        if e.op == "nempty":
            return lambda vals, chans: int(len(chans[c]) > 0)
        if e.op == "full":
            return lambda vals, chans: int(len(chans[c]) >= cap)
        return lambda vals, chans: int(len(chans[c]) < cap)
    if isinstance(e, Hole):
        raise GraphError("model still contains holes; rewrite or substitute them first")
    if isinstance(e, Call):
        raise GraphError(f"unexpanded macro {e.name}; desugar the model first")
    raise GraphError(f"cannot compile expression {e!r}")


Writer = Callable[[list, int], None]


def compile_store(target: Expr, scope: Scope) -> Callable[[list, tuple, int], None]:
    """Return ``store(vals_list, chans, value)`` for an lvalue."""
    if isinstance(target, Var):
        s = scope.slot(target.name)
        if s.size is not None:
            raise GraphError(f"cannot assign to whole array {target.name}")
        i, typ = s.base, s.type

        def store(vals: list, chans: tuple, v: int) -> None:
            vals[i] = wrap(typ, v)

        return store
    if isinstance(target, Index):
        s = scope.slot(target.name)
        if s.size is None:
            raise GraphError(f"{target.name} is not an array")
        idx = compile_expr(target.index, scope)
        base, size, typ, name = s.base, s.size, s.type, target.name

        def store_at(vals: list, chans: tuple, v: int) -> None:
            k = idx(tuple(vals), chans)
            if not 0 <= k < size:
                raise EvalError(f"index {k} out of bounds for {name}[{size}]")
            vals[base + k] = wrap(typ, v)

        return store_at
    raise GraphError(f"not assignable: {render_expr(target)}")


# ---------------------------------------------------------------------------
# Graph structure
# ---------------------------------------------------------------------------


class Transition:
    __slots__ = ("proc", "src", "dst", "sid", "sub", "kind", "cond", "action", "delta",
                 "groups", "else_group", "label")

    def __init__(self, proc: int, src: int, dst: int, sid: Sid, sub: int, kind: str,
                 cond: Optional[Evaluator], action, delta: fx.FeatExp, label: str):
        self.proc = proc
        self.src = src
        self.dst = dst
        self.sid = sid
        self.sub = sub
        self.kind = kind
        self.cond = cond
        self.action = action
        self.delta = delta
        self.groups: frozenset[int] = frozenset()
        self.else_group: Optional[int] = None
        self.label = label

    def copy(self, **changes) -> "Transition":
        t = Transition(self.proc, self.src, self.dst, self.sid, self.sub, self.kind, self.cond,
                       self.action, self.delta, self.label)
        t.groups = self.groups
        t.else_group = self.else_group
        for k, v in changes.items():
            setattr(t, k, v)
        return t

    @property
    def key(self) -> tuple:
        return (self.sid, self.sub)

    def __repr__(self) -> str:
        return f"Transition({self.src}->{self.dst} {self.label!r} @ {fx.render(self.delta)})"


@dataclass(frozen=True)
class Step:
    pre: int
    sid: Sid
    delta: fx.FeatExp
    post: int
    proc: int = -1
    label: str = "stutter"


@dataclass(frozen=True)
class Trace:
    stem: tuple[Step, ...]
    cycle: tuple[Step, ...] = ()

    @property
    def steps(self) -> tuple[Step, ...]:
        return self.stem + self.cycle


@dataclass
class FeaturedProgramGraph:
    proc_names: tuple[str, ...]
    init_locs: tuple[int, ...]
    end_locs: tuple[int, ...]
    violation_locs: tuple[int, ...]
    transitions: tuple[Transition, ...]
    layout: Layout
    n_locations: int
    out: dict[int, tuple[Transition, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.out:
            out: dict[int, list[Transition]] = {}
            for t in self.transitions:
                out.setdefault(t.src, []).append(t)
            self.out = {k: tuple(sorted(v, key=lambda t: t.key)) for k, v in out.items()}

    def with_transitions(self, ts: Sequence[Transition]) -> "FeaturedProgramGraph":
        return FeaturedProgramGraph(self.proc_names, self.init_locs, self.end_locs,
                                    self.violation_locs, tuple(ts), self.layout, self.n_locations)

    def initial_state(self) -> State:
        chans = tuple(() for _ in self.layout.chan_caps)
        return (self.init_locs, tuple(self.layout.init_vals), chans)

    def is_violation(self, s: State) -> bool:
        return any(loc == v for loc, v in zip(s[0], self.violation_locs))

    def sids(self) -> set[Sid]:
        return {t.sid for t in self.transitions}


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self, model: Model):
        self.model = model
        self.layout = Layout()
        self.transitions: list[Transition] = []
        self.n_loc = 0
        self.n_group = 0
        for g in model.globals:
            if isinstance(g, ChanDecl):
                self.layout.chans[g.name] = len(self.layout.chan_caps)
                self.layout.chan_caps.append(g.capacity)
                self.layout.chan_types.append(g.type)
            else:
                self.layout.add(self.layout.slots, g)
        for p in model.processes:
            scope: dict[str, Slot] = {}
            for d in p.locals:
                self.layout.add(scope, d, prefix=f"{p.name}.")
            self.layout.local_slots.append(scope)

    def loc(self) -> int:
        self.n_loc += 1
        return self.n_loc - 1

    def emit(self, t: Transition) -> Transition:
        self.transitions.append(t)
        return t

    def build(self) -> FeaturedProgramGraph:
        inits, ends, viols = [], [], []
        for pi, p in enumerate(self.model.processes):
            entry, end, viol = self.loc(), self.loc(), self.loc()
            inits.append(entry)
            ends.append(end)
            viols.append(viol)
            self.proc = pi
            self.scope = Scope(self.layout, pi)
            self.viol = viol
            self.compile(p.body, entry, end, None, fx.TRUE)
        return FeaturedProgramGraph(
            tuple(p.name for p in self.model.processes), tuple(inits), tuple(ends),
            tuple(viols), tuple(self.transitions), self.layout, self.n_loc)

    def basic(self, s: Stmt, src: int, dst: int, delta: fx.FeatExp, loop_exit: Optional[int],
              ) -> list[Transition]:
        scope, proc = self.scope, self.proc
        mk = lambda kind, cond, action, target=dst, sub=0, label=None: self.emit(Transition(
            proc, src, target, s.sid, sub, kind, cond, action, delta, label or _label(s)))
        if isinstance(s, Skip):
            return [mk("skip", None, None)]
        if isinstance(s, Else):
            return [mk("else", None, None)]
        if isinstance(s, Break):
            if loop_exit is None:
                raise GraphError("'break' outside of a do loop")
            return [mk("break", None, None, target=loop_exit)]
        if isinstance(s, ExprStmt):
            return [mk("guard", compile_expr(s.expr, scope), None)]
        if isinstance(s, Assign):
            value = compile_expr(s.value, scope)
            store = compile_store(s.target, scope)

            def assign(vals: tuple, chans: tuple):
                v = value(vals, chans)
                out = list(vals)
                store(out, chans, v)
                return tuple(out), chans

            return [mk("assign", None, assign)]
        if isinstance(s, Assert):
            ok = compile_expr(s.expr, scope)
            return [
                mk("assert", ok, None),
                mk("assert_fail", lambda v, c: int(not ok(v, c)), None, target=self.viol, sub=1,
                   label=f"assertion violated: {render_expr(s.expr)}"),
            ]
        if isinstance(s, Send):
            c = scope.chan(s.chan)
            cap = self.layout.chan_caps[c]
            typ = self.layout.chan_types[c]
            value = compile_expr(s.value, scope)

            def send(vals: tuple, chans: tuple):
                q = chans[c] + (wrap(typ, value(vals, chans)),)
                return vals, chans[:c] + (q,) + chans[c + 1:]

            return [mk("send", lambda v, ch: int(len(ch[c]) < cap), send)]
        if isinstance(s, Recv):
            c = scope.chan(s.chan)
            store = compile_store(s.target, scope)

            def recv(vals: tuple, chans: tuple):
                q = chans[c]
                out = list(vals)
                store(out, chans, q[0])
                return tuple(out), chans[:c] + (q[1:],) + chans[c + 1:]

            return [mk("recv", lambda v, ch: int(len(ch[c]) > 0), recv)]
        if isinstance(s, (InlineCall, Select)):
            raise GraphError(f"{type(s).__name__} must be desugared before graph construction")
        raise GraphError(f"unsupported statement {s!r}")

    def compile(self, s: Stmt, entry: int, exit_: int, loop_exit: Optional[int],
                delta: fx.FeatExp) -> list[Transition]:
        """Emit transitions for ``s`` between ``entry`` and ``exit_``; return the
        ones leaving ``entry``."""
        if isinstance(s, Seq):
            if not s.stmts:
                return self.basic(Skip(s.sid), entry, exit_, delta, loop_exit)
            locs = [entry] + [self.loc() for _ in s.stmts[1:]] + [exit_]
            first: list[Transition] = []
            for i, t in enumerate(s.stmts):
                out = self.compile(t, locs[i], locs[i + 1], loop_exit, delta)
                if i == 0:
                    first = out
            return first
        if isinstance(s, (If, Do)):
            is_do = isinstance(s, Do)
            head = self.loc() if is_do else entry
            opt_exit = head if is_do else exit_
            inner_exit = exit_ if is_do else loop_exit
            group = self.n_group
            self.n_group += 1
            entries: list[Transition] = []
            for opt in s.options:
                ts = self.compile(opt, head, opt_exit, inner_exit, delta)
                if isinstance(opt.stmts[0], Else):
                    for t in ts:
                        t.else_group = group
                else:
                    for t in ts:
                        t.groups = t.groups | {group}
                entries.extend(ts)
            if not is_do:
                return entries
            copies = [self.emit(t.copy(src=entry)) for t in entries]
            return copies
        if isinstance(s, IfDef):
            entries = []
            for psi, body in s.branches:
                entries.extend(self.compile(body, entry, exit_, loop_exit, _and(delta, psi)))
            rest = fx.Not(fx.disj(psi for psi, _ in s.branches))
            entries.extend(self.basic(Skip(s.sid + (IFDEF_SKIP_TAG,)), entry, exit_,
                                      _and(delta, rest), loop_exit))
            return entries
        if isinstance(s, JoinIf):
            entries = []
            for b in s.branches:
                if b.enabled:
                    entries.extend(self.compile(b.body, entry, exit_, loop_exit, _and(delta, b.pc)))
            return entries
        return self.basic(s, entry, exit_, delta, loop_exit)


def _and(a: fx.FeatExp, b: fx.FeatExp) -> fx.FeatExp:
    if a == fx.TRUE:
        return b
    if b == fx.TRUE:
        return a
    return fx.And(a, b)


def _label(s: Stmt) -> str:
    from .lang.render import render_stmt
    return " ".join(x.strip() for x in render_stmt(s))


def build_fpg(m: Model) -> FeaturedProgramGraph:
    """Compile a desugared, hole-free model or family into its program graph."""
    if not m.processes:
        raise GraphError("model has no processes")
    return _Builder(m).build()


# ---------------------------------------------------------------------------
# Unfolding
# ---------------------------------------------------------------------------


def _enabled(g: FeaturedProgramGraph, t: Transition, s: State) -> bool:
    if t.else_group is not None:
        grp = t.else_group
        return not any(_enabled(g, u, s) for u in g.out.get(t.src, ())
                       if grp in u.groups and u.proc == t.proc)
    if t.cond is None:
        return True
    return bool(t.cond(s[1], s[2]))


def successors(g: FeaturedProgramGraph, s: State) -> list[tuple[Step, State]]:
    """Enabled moves from ``s`` in deterministic order (process, then sid).

    A state without any enabled move gets a single stutter self-loop.
    """
    locs, vals, chans = s
    out: list[tuple[Step, State]] = []
    pre = None
    for p, loc in enumerate(locs):
        for t in g.out.get(loc, ()):
            try:
                if not _enabled(g, t, s):
                    continue
                if t.action is not None:
                    nvals, nchans = t.action(vals, chans)
                else:
                    nvals, nchans = vals, chans
                nlocs = locs[:p] + (t.dst,) + locs[p + 1:]
                label = t.label
            except EvalError as err:
                nvals, nchans = vals, chans
                nlocs = locs[:p] + (g.violation_locs[p],) + locs[p + 1:]
                label = f"runtime error: {err}"
            post = (nlocs, nvals, nchans)
            if pre is None:
                pre = digest(s)
            out.append((Step(pre, t.sid, t.delta, digest(post), p, label), post))
    if not out:
        d = digest(s)
        out.append((Step(d, (), fx.TRUE, d), s))
    return out


def digest(s: State) -> int:
    locs, vals, chans = s
    parts = [b"L", struct.pack(f"<{len(locs)}q", *locs), b"V",
             struct.pack(f"<{len(vals)}q", *vals), b"C"]
    for q in chans:
        parts.append(struct.pack(f"<{len(q) + 1}q", len(q), *q))
    return int.from_bytes(hashlib.blake2b(b"".join(parts), digest_size=8).digest(), "little")


def project_config(g: FeaturedProgramGraph, k: fx.Config) -> FeaturedProgramGraph:
    """Single-variant graph: keep transitions whose presence condition holds in ``k``."""
    kept = [t.copy(delta=fx.TRUE) for t in g.transitions if fx.evaluate(t.delta, k)]
    return g.with_transitions(kept)


def project_space(g: FeaturedProgramGraph, space: fx.ConfigSpace) -> FeaturedProgramGraph:
    """Join abstraction at graph level: keep transitions realizable in some member."""
    cache: dict[fx.FeatExp, bool] = {}
    kept = []
    for t in g.transitions:
        if t.delta not in cache:
            cache[t.delta] = fx.alpha_join(space, t.delta)
        if cache[t.delta]:
            kept.append(t)
    return g.with_transitions(kept)


def reachable(g: FeaturedProgramGraph, cap: Optional[int] = None) -> tuple[int, int]:
    """Number of reachable states and of explored transitions (stutters included)."""
    init = g.initial_state()
    seen = {init}
    stack = [init]
    edges = 0
    while stack:
        s = stack.pop()
        for _, t in successors(g, s):
            edges += 1
            if t not in seen:
                seen.add(t)
                if cap is not None and len(seen) > cap:
                    raise GraphError(f"state cap {cap} exceeded")
                stack.append(t)
    return len(seen), edges


def to_dot(g: FeaturedProgramGraph) -> str:
    lines = ["digraph fpg {", "  rankdir=TB;"]
    for p, (i, e, v) in enumerate(zip(g.init_locs, g.end_locs, g.violation_locs)):
        lines.append(f'  l{i} [shape=box,label="{g.proc_names[p]}: l{i}"];')
        lines.append(f'  l{e} [shape=doublecircle,label="end l{e}"];')
        lines.append(f'  l{v} [shape=octagon,color=red,label="violation l{v}"];')
    for t in g.transitions:
        label = t.label.replace('"', '\\"')
        if t.delta != fx.TRUE:
            label += f" @ {fx.render(t.delta)}"
        lines.append(f'  l{t.src} -> l{t.dst} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
