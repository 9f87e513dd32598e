"""Deterministic pretty-printer; ``parse(render(m))`` equals ``m`` up to sids."""

from __future__ import annotations

from .. import featexp as fx
from .ast import (
    Assert, Assign, BinOp, BoolLit, Break, Call, ChanDecl, ChanOp, Do, Else, Expr, ExprStmt,
    Hole, If, IfDef, Index, InlineCall, JoinIf, LAtom, LConst, LNot, LUn, Ltl, Model,
    Num, Recv, Select, Send, Seq, Skip, Stmt, UnOp, Var, VarDecl,
)

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}


def render_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Num):
        return f"({e.value})" if e.value < 0 and parent > 0 else str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{e.name}[{render_expr(e.index)}]"
    if isinstance(e, Hole):
        return "??" if e.lo is None else f"??[{e.lo},{e.hi}]"
    if isinstance(e, ChanOp):
        return f"{e.op}({e.chan})"
    if isinstance(e, Call):
        return f"{e.name}(" + ", ".join(render_expr(a) for a in e.args) + ")"
    if isinstance(e, UnOp):
        return e.op + render_expr(e.arg, 7)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # left-associative: the right operand needs parens at equal precedence
        s = f"{render_expr(e.left, p)} {e.op} {render_expr(e.right, p + 1)}"
        return f"({s})" if p < parent else s
    raise TypeError(f"not an expression: {e!r}")


def render_ltl(f: Ltl) -> str:
    if isinstance(f, LConst):
        return "true" if f.value else "false"
    if isinstance(f, LAtom):
        return f"({render_expr(f.expr)})"
    if isinstance(f, LNot):
        return f"!{render_ltl(f.arg)}"
    if isinstance(f, LUn):
        sep = " " if f.op == "X" else ""
        return f"{f.op}{sep}{render_ltl(f.arg)}"
    return f"({render_ltl(f.left)} {f.op} {render_ltl(f.right)})"


def _options(keyword: str, closer: str, options, depth: int) -> list[str]:
    pad = "    " * depth
    lines = [pad + keyword]
    for opt in options:
        lines.extend(_option(opt, depth))
    lines.append(pad + closer)
    return lines


def _option(body: Seq, depth: int, head: str = "") -> list[str]:
    pad = "    " * depth
    inner = _seq_lines(body, depth + 1)
    if not inner:
        return [f"{pad}:: {head}skip"]
    first = inner[0].strip()
    if len(inner) == 1 or not head:
        out = [f"{pad}:: {head}{first}"]
    else:
        out = [f"{pad}:: {head}{first}"]
    out.extend(inner[1:])
    return out


def _seq_lines(s: Seq, depth: int) -> list[str]:
    lines: list[str] = []
    for i, t in enumerate(s.stmts):
        chunk = render_stmt(t, depth)
        if i < len(s.stmts) - 1:
            chunk[-1] += ";"
        lines.extend(chunk)
    return lines


def render_stmt(s: Stmt, depth: int = 0) -> list[str]:
    pad = "    " * depth
    if isinstance(s, Skip):
        return [pad + "skip"]
    if isinstance(s, Break):
        return [pad + "break"]
    if isinstance(s, Else):
        return [pad + "else"]
    if isinstance(s, Assign):
        return [f"{pad}{render_expr(s.target)} = {render_expr(s.value)}"]
    if isinstance(s, ExprStmt):
        return [f"{pad}({render_expr(s.expr)})"]
    if isinstance(s, Assert):
        return [f"{pad}assert({render_expr(s.expr)})"]
    if isinstance(s, Send):
        return [f"{pad}{s.chan}!{render_expr(s.value, 7)}"]
    if isinstance(s, Recv):
        return [f"{pad}{s.chan}?{render_expr(s.target)}"]
    if isinstance(s, InlineCall):
        return [f"{pad}{s.name}(" + ", ".join(render_expr(a) for a in s.args) + ")"]
    if isinstance(s, Select):
        return [f"{pad}select({render_expr(s.target)} : {render_expr(s.lo)} .. {render_expr(s.hi)})"]
    if isinstance(s, Seq):
        return [pad + "{"] + _seq_lines(s, depth + 1) + [pad + "}"]
    if isinstance(s, If):
        return _options("if", "fi", s.options, depth)
    if isinstance(s, Do):
        return _options("do", "od", s.options, depth)
    if isinstance(s, IfDef):
        lines = [pad + "#if"]
        for psi, body in s.branches:
            lines.extend(_option(body, depth, f"({fx.render(psi)}) -> "))
        lines.append(pad + "#endif")
        return lines
    if isinstance(s, JoinIf):
        lines = [pad + "if"]
        for b in s.branches:
            head = f"{'true' if b.enabled else 'false'} /* {fx.render(b.pc)} */ -> "
            lines.extend(_option(b.body, depth, head))
        lines.append(pad + "fi")
        return lines
    raise TypeError(f"not a statement: {s!r}")


def _decl(d: VarDecl | ChanDecl) -> str:
    if isinstance(d, ChanDecl):
        return f"chan {d.name} = [{d.capacity}] of {{ {d.type} }};"
    size = f"[{d.size}]" if d.size is not None else ""
    init = f" = {d.init}" if d.init else ""
    return f"{d.type} {d.name}{size}{init};"


def render(m: Model) -> str:
    out: list[str] = []
    for d in m.defines:
        params = f"({', '.join(d.params)})" if d.params is not None else ""
        out.append(f"#define {d.name}{params} {d.text}")
    for f in m.features:
        out.append(f"feature {f.name} : {f.lo} .. {f.hi};")
    for g in m.globals:
        out.append(_decl(g))
    if out:
        out.append("")
    for inl in m.inlines:
        out.append(f"inline {inl.name}({', '.join(inl.params)}) {{")
        out.extend(_seq_lines(inl.body, 1))
        out.append("}")
        out.append("")
    for p in m.processes:
        out.append("init {" if p.is_init else f"active proctype {p.name}() {{")
        for d in p.locals:
            out.append("    " + _decl(d))
        out.extend(_seq_lines(p.body, 1))
        out.append("}")
        out.append("")
    for prop in m.props:
        out.append(f"ltl {prop.name} {{ {render_ltl(prop.formula)} }}")
    return "\n".join(out).rstrip() + "\n"
