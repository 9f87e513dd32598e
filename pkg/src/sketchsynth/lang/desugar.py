"""AST walkers and removal of ``#define``, ``inline`` and ``select``."""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, Iterator, Mapping

from .ast import (
    INLINE_TAG, SELECT_TAG, Assert, Assign, BinOp, Call, ChanOp, Define, Do, Expr, ExprStmt,
    Hole, If, IfDef, Index, InlineCall, JoinBranch, JoinIf, LAtom, LBin, LNot, LtlProp,
    LUn, Ltl, Model, Num, Recv, Select, Send, Seq, Stmt, UnOp, Var,
)


class DesugarError(Exception):
    pass


# -- generic traversal ------------------------------------------------------------


def children(s: Stmt) -> list[Seq]:
    if isinstance(s, Seq):
        return [s]
    if isinstance(s, (If, Do)):
        return list(s.options)
    if isinstance(s, IfDef):
        return [b for _, b in s.branches]
    if isinstance(s, JoinIf):
        return [b.body for b in s.branches]
    return []


def walk_stmts(s: Stmt) -> Iterator[Stmt]:
    """Pre-order walk over ``s`` and all nested statements (``Seq`` included)."""
    yield s
    if isinstance(s, Seq):
        for t in s.stmts:
            yield from walk_stmts(t)
    else:
        for c in children(s):
            yield from walk_stmts(c)


def stmt_exprs(s: Stmt) -> list[Expr]:
    """Expressions owned directly by a basic statement (lvalues included)."""
    if isinstance(s, Assign):
        return [s.target, s.value]
    if isinstance(s, (ExprStmt, Assert)):
        return [s.expr]
    if isinstance(s, Send):
        return [Var(s.chan), s.value]
    if isinstance(s, Recv):
        return [Var(s.chan), s.target]
    if isinstance(s, InlineCall):
        return list(s.args)
    if isinstance(s, Select):
        return [s.target, s.lo, s.hi]
    return []


def expr_nodes(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, BinOp):
        yield from expr_nodes(e.left)
        yield from expr_nodes(e.right)
    elif isinstance(e, UnOp):
        yield from expr_nodes(e.arg)
    elif isinstance(e, Index):
        yield from expr_nodes(e.index)
    elif isinstance(e, Call):
        for a in e.args:
            yield from expr_nodes(a)


def expr_names(e: Expr) -> set[str]:
    names: set[str] = set()
    for n in expr_nodes(e):
        if isinstance(n, (Var, Index, Call)):
            names.add(n.name)
        elif isinstance(n, ChanOp):
            names.add(n.chan)
    return names


def holes_in(e: Expr) -> list[Hole]:
    return [n for n in expr_nodes(e) if isinstance(n, Hole)]


def ltl_atoms(f: Ltl) -> list[LAtom]:
    if isinstance(f, LAtom):
        return [f]
    if isinstance(f, (LNot, LUn)):
        return ltl_atoms(f.arg)
    if isinstance(f, LBin):
        return ltl_atoms(f.left) + ltl_atoms(f.right)
    return []


def map_expr(e: Expr, f: Callable[[Expr], Expr | None]) -> Expr:
    """Bottom-up rewrite; ``f`` returns a replacement or ``None`` to keep."""
    if isinstance(e, BinOp):
        e = BinOp(e.op, map_expr(e.left, f), map_expr(e.right, f))
    elif isinstance(e, UnOp):
        e = UnOp(e.op, map_expr(e.arg, f))
    elif isinstance(e, Index):
        e = Index(e.name, map_expr(e.index, f))
    elif isinstance(e, Call):
        e = Call(e.name, tuple(map_expr(a, f) for a in e.args))
    out = f(e)
    return e if out is None else out


def map_stmt(s: Stmt, fe: Callable[[Expr], Expr], fsid: Callable[[tuple], tuple] = lambda x: x) -> Stmt:
    """Rebuild ``s`` with every owned expression passed through ``fe`` and
    every sid through ``fsid``."""
    sid = fsid(s.sid)
    if isinstance(s, Seq):
        return Seq(tuple(map_stmt(t, fe, fsid) for t in s.stmts), sid)
    if isinstance(s, If):
        return If(tuple(map_stmt(o, fe, fsid) for o in s.options), sid)
    if isinstance(s, Do):
        return Do(tuple(map_stmt(o, fe, fsid) for o in s.options), sid)
    if isinstance(s, IfDef):
        return IfDef(tuple((p, map_stmt(b, fe, fsid)) for p, b in s.branches), sid)
    if isinstance(s, JoinIf):
        return JoinIf(tuple(JoinBranch(b.enabled, b.pc, map_stmt(b.body, fe, fsid))
                            for b in s.branches), sid)
    if isinstance(s, Assign):
        return Assign(fe(s.target), fe(s.value), sid)
    if isinstance(s, ExprStmt):
        return ExprStmt(fe(s.expr), sid)
    if isinstance(s, Assert):
        return Assert(fe(s.expr), sid)
    if isinstance(s, Send):
        return Send(_chan_name(fe(Var(s.chan))), fe(s.value), sid)
    if isinstance(s, Recv):
        return Recv(_chan_name(fe(Var(s.chan))), fe(s.target), sid)
    if isinstance(s, InlineCall):
        return InlineCall(s.name, tuple(fe(a) for a in s.args), sid)
    if isinstance(s, Select):
        return Select(fe(s.target), fe(s.lo), fe(s.hi), sid)
    return replace(s, sid=sid)


def map_ltl(f: Ltl, fe: Callable[[Expr], Expr]) -> Ltl:
    if isinstance(f, LAtom):
        return LAtom(fe(f.expr))
    if isinstance(f, LNot):
        return LNot(map_ltl(f.arg, fe))
    if isinstance(f, LUn):
        return LUn(f.op, map_ltl(f.arg, fe))
    if isinstance(f, LBin):
        return LBin(f.op, map_ltl(f.left, fe), map_ltl(f.right, fe))
    return f


def _chan_name(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    raise DesugarError(f"expected a channel name, got {e!r}")


# -- #define ----------------------------------------------------------------------


def substitute_names(e: Expr, binding: Mapping[str, Expr]) -> Expr:
    def f(n: Expr) -> Expr | None:
        if isinstance(n, Var) and n.name in binding:
            return binding[n.name]
        if isinstance(n, Index) and n.name in binding:
            arg = binding[n.name]
            if not isinstance(arg, Var):
                raise DesugarError(f"cannot index non-variable argument bound to {n.name}")
            return Index(arg.name, n.index)
        if isinstance(n, ChanOp) and n.chan in binding:
            return ChanOp(n.op, _chan_name(binding[n.chan]))
        return None

    return map_expr(e, f)


def expand_expr(e: Expr, defines: Mapping[str, Define], _stack: tuple[str, ...] = ()) -> Expr:
    from .parser import parse_expr, ParseError

    def f(n: Expr) -> Expr | None:
        name = n.name if isinstance(n, (Var, Call)) else None
        if name is None or name not in defines:
            return None
        d = defines[name]
        if name in _stack:
            raise DesugarError(f"recursive #define {name}")
        if isinstance(n, Var) and d.params:
            raise DesugarError(f"macro {name} expects {len(d.params)} argument(s)")
        args = n.args if isinstance(n, Call) else ()
        params = d.params or ()
        if len(args) != len(params):
            raise DesugarError(f"macro {name} expects {len(params)} argument(s), got {len(args)}")
        try:
            body = parse_expr(d.text)
        except ParseError as err:
            raise DesugarError(f"#define {name}: {err}") from None
        body = substitute_names(body, dict(zip(params, args)))
        return expand_expr(body, defines, _stack + (name,))

    return map_expr(e, f)


# -- desugaring ----------------------------------------------------------------


def desugar(m: Model) -> Model:
    """Expand macros, inline calls and ``select`` statements."""
    from .parser import fold_constant

    defines = {d.name: d for d in m.defines}
    inlines = {i.name: i for i in m.inlines}
    fe = lambda e: expand_expr(e, defines)

    def expand(s: Stmt, stack: tuple[str, ...]) -> Stmt:
        if isinstance(s, InlineCall):
            if s.name not in inlines:
                raise DesugarError(f"unknown inline {s.name}")
            if s.name in stack:
                raise DesugarError(f"recursive inline {s.name}")
            inl = inlines[s.name]
            if len(s.args) != len(inl.params):
                raise DesugarError(
                    f"inline {s.name} expects {len(inl.params)} argument(s), got {len(s.args)}")
            binding = dict(zip(inl.params, (fe(a) for a in s.args)))
            prefix = s.sid + (INLINE_TAG,)
            body = map_stmt(inl.body, lambda e: substitute_names(fe(e), binding),
                            lambda sid: prefix + sid)
            body = expand(body, stack + (s.name,))
            return Seq(body.stmts, s.sid)
        if isinstance(s, Select):
            target = fe(s.target)
            lo, hi = fold_constant(fe(s.lo)), fold_constant(fe(s.hi))
            if lo is None or hi is None:
                raise DesugarError("select bounds must be constant")
            if lo > hi:
                raise DesugarError(f"empty select range {lo}..{hi}")
            opts = tuple(
                Seq((Assign(target, Num(v), s.sid + (SELECT_TAG, v - lo)),), ())
                for v in range(lo, hi + 1)
            )
            return If(opts, s.sid)
        if isinstance(s, Seq):
            return Seq(tuple(expand(t, stack) for t in s.stmts), s.sid)
        if isinstance(s, If):
            return If(tuple(expand(o, stack) for o in s.options), s.sid)
        if isinstance(s, Do):
            return Do(tuple(expand(o, stack) for o in s.options), s.sid)
        if isinstance(s, IfDef):
            return IfDef(tuple((p, expand(b, stack)) for p, b in s.branches), s.sid)
        return map_stmt(s, fe)

    procs = tuple(replace(p, body=expand(p.body, ())) for p in m.processes)
    props = tuple(LtlProp(p.name, map_ltl(p.formula, fe)) for p in m.props)
    return replace(m, defines=(), inlines=(), processes=procs, props=props)
