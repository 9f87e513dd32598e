"""Lexer and recursive-descent parser for ``.pmls`` models and sketches."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .. import featexp as fx
from .ast import (
    TYPE_RANGES, Assert, Assign, BinOp, BoolLit, Break, Call, ChanDecl, ChanOp, Define, Do,
    Else, Expr, ExprStmt, Hole, If, IfDef, Index, Inline, InlineCall, LAtom, LBin, LConst,
    LNot, LtlProp, LUn, Ltl, Model, Num, Process, Recv, Select, Send, Seq, Skip, Stmt, UnOp,
    Var, VarDecl,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, op, define, eof
    text: str
    line: int
    col: int


KEYWORDS = {
    "if", "fi", "do", "od", "skip", "break", "else", "assert", "init", "proctype", "active",
    "inline", "ltl", "chan", "of", "select", "true", "false", "feature",
    "len", "empty", "full", "nempty", "nfull",
} | set(TYPE_RANGES)

_OPS = [
    "#endif", "#if", "::", "->", "??", "..", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "<>", "[]", "=", "<", ">", "+", "-", "*", "/", "%", "!", "?", ";", ",", ":", "(", ")",
    "{", "}", "[", "]", "X", "U", "V",
]
_OP_RE = "|".join(re.escape(o) for o in sorted(_OPS, key=len, reverse=True) if o not in "XUV")
_LEX = re.compile(
    r"(?P<ws>[ \t\r\n]+)|(?P<lc>//[^\n]*)|(?P<bc>/\*.*?\*/)"
    r"|(?P<define>\#define[^\n]*)"
    r"|(?P<num>\d+)|(?P<ident>[A-Za-z_]\w*)"
    rf"|(?P<op>{_OP_RE})",
    re.S,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _LEX.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind in ("num", "ident", "op", "define"):
            tokens.append(Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_BINARY_PREC = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]

_STOP = {"od", "fi", "::", "}", "#endif", "eof"}


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.next_sid = 1
        self.next_hole = 1
        self.inlines: set[str] = set()
        self.defines: dict[str, Define] = {}

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind != "eof" and t.text in texts if texts else False

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        t = tok or self.tok
        return ParseError(message, t.line, t.col)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "eof":
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.advance()
        return t.text

    def number(self) -> int:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        t = self.tok
        if t.kind != "num":
            raise self.error(f"expected integer, found {t.text or 'end of input'!r}")
        self.advance()
        return -int(t.text) if neg else int(t.text)

    def sid(self) -> tuple[int, ...]:
        s = (self.next_sid,)
        self.next_sid += 1
        return s

    # -- top level -----------------------------------------------------------

    def model(self) -> Model:
        defines: list[Define] = []
        features: list[fx.FeatureDecl] = []
        globs: list = []
        inlines: list[Inline] = []
        procs: list[Process] = []
        props: list[LtlProp] = []
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind == "define":
                defines.append(self.define())
            elif t.text == "feature":
                features.append(self.feature_decl())
            elif t.text in TYPE_RANGES:
                for decl, init_expr in self.var_decls():
                    if init_expr is not None:
                        raise self.error(f"global {decl.name} needs a constant initializer", t)
                    globs.append(decl)
            elif t.text == "chan":
                globs.extend(self.chan_decls())
            elif t.text == "inline":
                inlines.append(self.inline())
            elif t.text in ("init", "active", "proctype"):
                procs.append(self.process())
            elif t.text == "ltl":
                props.append(self.ltl())
            elif t.text == ";":
                self.advance()
            else:
                raise self.error(f"unexpected {t.text!r} at top level")
        inits = [p for p in procs if p.is_init]
        if len(inits) > 1:
            raise ParseError("at most one init process is allowed")
        return Model(tuple(defines), tuple(features), tuple(globs), tuple(inlines),
                     tuple(procs), tuple(props))

    def define(self) -> Define:
        t = self.advance()
        m = re.match(r"#define\s+([A-Za-z_]\w*)(\(([^)]*)\))?\s*(.*)$", t.text)
        if not m:
            raise self.error("malformed #define", t)
        name = m.group(1)
        params = None
        if m.group(2) is not None:
            params = tuple(p.strip() for p in m.group(3).split(",") if p.strip())
        body = m.group(4).strip()
        if not body:
            raise self.error(f"#define {name} has an empty body", t)
        d = Define(name, params, body)
        self.defines[name] = d
        return d

    def feature_decl(self) -> fx.FeatureDecl:
        self.expect("feature")
        name = self.ident()
        self.expect(":")
        lo = self.number()
        self.expect("..")
        hi = self.number()
        if self.at(";"):
            self.advance()
        try:
            return fx.FeatureDecl(name, lo, hi)
        except fx.FeatureError as e:
            raise self.error(str(e)) from None

    def var_decls(self) -> list[tuple[VarDecl, Optional[Expr]]]:
        typ = self.advance().text
        out = []
        while True:
            name = self.ident()
            size = None
            if self.at("["):
                self.advance()
                size = self.const_int(self.expr())
                self.expect("]")
                if size <= 0:
                    raise self.error(f"array {name} must have positive size")
            init: Optional[Expr] = None
            if self.at("="):
                self.advance()
                init = self.expr()
            value = _fold(self.expand_defines(init)) if init is not None else 0
            if value is None:
                out.append((VarDecl(name, typ, size, 0), init))
            else:
                out.append((VarDecl(name, typ, size, value), None))
            if not self.at(","):
                break
            self.advance()
        return out

    def chan_decls(self) -> list[ChanDecl]:
        self.expect("chan")
        out = []
        while True:
            name = self.ident()
            self.expect("=")
            self.expect("[")
            cap = self.const_int(self.expr())
            self.expect("]")
            self.expect("of")
            self.expect("{")
            typ = self.advance().text
            if typ not in TYPE_RANGES:
                raise self.error(f"unknown message type {typ!r}")
            if self.at(","):
                raise self.error("only single-field channels are supported")
            self.expect("}")
            if cap <= 0:
                raise self.error(f"channel {name} must have positive capacity")
            out.append(ChanDecl(name, cap, typ))
            if not self.at(","):
                break
            self.advance()
        return out

    def const_int(self, e: Expr) -> int:
        v = _fold(self.expand_defines(e))
        if v is None:
            raise self.error("expected a constant expression")
        return v

    def expand_defines(self, e: Expr) -> Expr:
        from .desugar import expand_expr
        return expand_expr(e, self.defines)

    def inline(self) -> Inline:
        self.expect("inline")
        name = self.ident()
        self.expect("(")
        params: list[str] = []
        while not self.at(")"):
            params.append(self.ident())
            if self.at(","):
                self.advance()
        self.expect(")")
        self.inlines.add(name)
        self.expect("{")
        locals_: list[VarDecl] = []
        body = self.sequence(locals_)
        if locals_:
            raise self.error(f"declarations are not allowed inside inline {name}")
        self.expect("}")
        return Inline(name, tuple(params), body)

    def process(self) -> Process:
        is_init = self.at("init")
        if is_init:
            self.advance()
            name = "init"
        else:
            if self.at("active"):
                self.advance()
            self.expect("proctype")
            name = self.ident()
            self.expect("(")
            self.expect(")")
        self.expect("{")
        locals_: list[VarDecl] = []
        body = self.sequence(locals_)
        self.expect("}")
        return Process(name, body, tuple(locals_), is_init)

    # -- LTL -------------------------------------------------------------------

    def ltl(self) -> LtlProp:
        self.expect("ltl")
        name = self.ident()
        self.expect("{")
        f = self.ltl_formula()
        self.expect("}")
        return LtlProp(name, f)

    def ltl_formula(self) -> Ltl:
        left = self.ltl_or()
        if self.at("->"):
            self.advance()
            return LBin("->", left, self.ltl_formula())
        return left

    def ltl_or(self) -> Ltl:
        e = self.ltl_and()
        while self.at("||"):
            self.advance()
            e = LBin("||", e, self.ltl_and())
        return e

    def ltl_and(self) -> Ltl:
        e = self.ltl_until()
        while self.at("&&"):
            self.advance()
            e = LBin("&&", e, self.ltl_until())
        return e

    def ltl_until(self) -> Ltl:
        e = self.ltl_unary()
        if self.tok.kind == "ident" and self.tok.text in ("U", "V"):
            op = self.advance().text
            return LBin(op, e, self.ltl_until())
        return e

    def ltl_unary(self) -> Ltl:
        t = self.tok
        if t.text in ("[]", "<>"):
            self.advance()
            return LUn(t.text, self.ltl_unary())
        if t.kind == "ident" and t.text == "X":
            self.advance()
            return LUn("X", self.ltl_unary())
        if t.text == "!":
            self.advance()
            return LNot(self.ltl_unary())
        if t.text in ("true", "false") and self.peek().text not in _REL_OPS:
            self.advance()
            return LConst(t.text == "true")
        if t.text == "(":
            save = self.i
            self.advance()
            try:
                f = self.ltl_formula()
                self.expect(")")
            except ParseError:
                self.i = save
                return LAtom(self.expr_level(2))
            if self.tok.text in _REL_OPS | _ARITH_OPS:
                # parenthesized arithmetic such as ``(a+b) < c``
                self.i = save
                return LAtom(self.expr_level(2))
            return f
        return LAtom(self.expr_level(2))

    # -- statements ------------------------------------------------------------

    def sequence(self, locals_: list[VarDecl]) -> Seq:
        stmts: list[Stmt] = []
        while True:
            while self.at(";", "->"):
                self.advance()
            if self.tok.kind == "eof" or self.tok.text in _STOP:
                break
            if self.tok.text in TYPE_RANGES:
                for decl, init in self.var_decls():
                    locals_.append(decl)
                    if init is not None:
                        stmts.append(Assign(Var(decl.name), init, self.sid()))
                continue
            stmts.append(self.statement(locals_))
        return Seq(tuple(stmts), ())

    def options(self, closer: str, locals_: list[VarDecl]) -> tuple[Seq, ...]:
        opts = []
        while self.at("::"):
            self.advance()
            body = self.sequence(locals_)
            if not body.stmts:
                raise self.error("empty option")
            for s in body.stmts[1:]:
                if isinstance(s, Else):
                    raise self.error("'else' must be the first statement of an option")
            opts.append(body)
        if not opts:
            raise self.error(f"'{closer}' requires at least one option")
        self.expect(closer)
        if sum(1 for o in opts if isinstance(o.stmts[0], Else)) > 1:
            raise self.error("at most one 'else' option is allowed")
        return tuple(opts)

    def statement(self, locals_: list[VarDecl]) -> Stmt:
        t = self.tok
        text = t.text
        if text == "skip":
            self.advance()
            return Skip(self.sid())
        if text == "break":
            self.advance()
            return Break(self.sid())
        if text == "else":
            self.advance()
            return Else(self.sid())
        if text == "if":
            self.advance()
            sid = self.sid()
            return If(self.options("fi", locals_), sid)
        if text == "do":
            self.advance()
            sid = self.sid()
            return Do(self.options("od", locals_), sid)
        if text == "#if":
            self.advance()
            sid = self.sid()
            branches = []
            while self.at("::"):
                self.advance()
                psi = self.feature_expr()
                self.expect("->")
                body = self.sequence(locals_)
                branches.append((psi, body))
            if not branches:
                raise self.error("'#if' requires at least one branch")
            self.expect("#endif")
            return IfDef(tuple(branches), sid)
        if text == "{":
            self.advance()
            body = self.sequence(locals_)
            self.expect("}")
            return Seq(body.stmts, self.sid())
        if text == "assert":
            self.advance()
            sid = self.sid()
            return Assert(self.expr(), sid)
        if text == "select":
            self.advance()
            sid = self.sid()
            self.expect("(")
            target = self.lvalue()
            self.expect(":")
            lo = self.expr_level(4)
            self.expect("..")
            hi = self.expr_level(4)
            self.expect(")")
            return Select(target, lo, hi, sid)
        if t.kind == "ident" and text in self.inlines and self.peek().text == "(":
            self.advance()
            sid = self.sid()
            self.expect("(")
            args = []
            while not self.at(")"):
                args.append(self.expr())
                if self.at(","):
                    self.advance()
            self.expect(")")
            return InlineCall(text, tuple(args), sid)
        sid = self.sid()
        e = self.expr()
        if self.at("=") and _is_lvalue(e):
            self.advance()
            return Assign(e, self.expr(), sid)
        if self.at("++", "--") and _is_lvalue(e):
            op = "+" if self.advance().text == "++" else "-"
            return Assign(e, BinOp(op, e, Num(1)), sid)
        if self.at("!") and isinstance(e, Var):
            self.advance()
            return Send(e.name, self.expr(), sid)
        if self.at("?") and isinstance(e, Var):
            self.advance()
            return Recv(e.name, self.lvalue(), sid)
        return ExprStmt(e, sid)

    def lvalue(self):
        e = self.expr_level(6)
        if not _is_lvalue(e):
            raise self.error("expected a variable or array element")
        return e

    # -- feature expressions inside #if -----------------------------------------

    def feature_expr(self) -> fx.FeatExp:
        e = self.fe_and()
        while self.at("||"):
            self.advance()
            e = fx.Or(e, self.fe_and())
        return e

    def fe_and(self) -> fx.FeatExp:
        e = self.fe_unary()
        while self.at("&&"):
            self.advance()
            e = fx.And(e, self.fe_unary())
        return e

    def fe_unary(self) -> fx.FeatExp:
        if self.at("!"):
            self.advance()
            return fx.Not(self.fe_unary())
        if self.at("("):
            self.advance()
            e = self.feature_expr()
            self.expect(")")
            return e
        if self.at("true", "false"):
            return fx.Const(self.advance().text == "true")
        name = self.ident()
        op = self.advance()
        n = self.number()
        rel = op.text
        if rel in ("=", "=="):
            return fx.eq(name, n)
        if rel == "!=":
            return fx.Not(fx.eq(name, n))
        if rel == "<":
            return fx.lt(name, n)
        if rel == "<=":
            return fx.lt(name, n + 1)
        if rel == ">":
            return fx.Not(fx.lt(name, n + 1))
        if rel == ">=":
            return fx.Not(fx.lt(name, n))
        raise self.error(f"bad relation {rel!r} in feature expression", op)

    # -- expressions ---------------------------------------------------------

    def expr(self) -> Expr:
        return self.expr_level(0)

    def expr_level(self, level: int) -> Expr:
        if level == len(_BINARY_PREC):
            return self.unary()
        e = self.expr_level(level + 1)
        while self.tok.kind == "op" and self.tok.text in _BINARY_PREC[level]:
            op = self.advance().text
            e = BinOp(op, e, self.expr_level(level + 1))
        return e

    def unary(self) -> Expr:
        if self.at("!"):
            self.advance()
            return UnOp("!", self.unary())
        if self.at("-"):
            self.advance()
            arg = self.unary()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return UnOp("-", arg)
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(int(t.text))
        if t.text in ("true", "false"):
            self.advance()
            return BoolLit(t.text == "true")
        if t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.text == "??":
            self.advance()
            lo = hi = None
            if self.at("[") and self.peek().text != "]":
                self.advance()
                lo = self.number()
                self.expect(",")
                hi = self.number()
                self.expect("]")
                if lo > hi:
                    raise self.error(f"empty hole domain [{lo},{hi}]", t)
            h = Hole(self.next_hole, lo, hi)
            self.next_hole += 1
            return h
        if t.text in ("len", "empty", "full", "nempty", "nfull"):
            self.advance()
            self.expect("(")
            name = self.ident()
            self.expect(")")
            return ChanOp(t.text, name)
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.advance()
            if self.at("["):
                self.advance()
                idx = self.expr()
                self.expect("]")
                return Index(t.text, idx)
            if self.at("("):
                self.advance()
                args = []
                while not self.at(")"):
                    args.append(self.expr())
                    if self.at(","):
                        self.advance()
                    elif not self.at(")"):
                        raise self.error("expected ',' or ')'")
                self.expect(")")
                return Call(t.text, tuple(args))
            return Var(t.text)
        raise self.error(f"unexpected {t.text or 'end of input'!r} in expression")


_REL_OPS = {"==", "!=", "<", "<=", ">", ">="}
_ARITH_OPS = {"+", "-", "*", "/", "%"}


def _is_lvalue(e: Expr) -> bool:
    return isinstance(e, (Var, Index, Call))


def _has_hole(e: Expr) -> bool:
    if isinstance(e, Hole):
        return True
    if isinstance(e, BinOp):
        return _has_hole(e.left) or _has_hole(e.right)
    if isinstance(e, UnOp):
        return _has_hole(e.arg)
    if isinstance(e, Index):
        return _has_hole(e.index)
    if isinstance(e, Call):
        return any(_has_hole(a) for a in e.args)
    return False


def _fold(e: Optional[Expr]) -> Optional[int]:
    """Value of a variable-free expression, or ``None``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, BoolLit):
        return int(e.value)
    if isinstance(e, UnOp):
        v = _fold(e.arg)
        if v is None:
            return None
        return -v if e.op == "-" else int(not v)
    if isinstance(e, BinOp):
        a, b = _fold(e.left), _fold(e.right)
        if a is None or b is None:
            return None
        from ..graph import apply_binop
        try:
            return apply_binop(e.op, a, b)
        except ZeroDivisionError:
            return None
    return None


fold_constant = _fold


def parse(text: str) -> Model:
    """Parse ``.pmls`` source into a :class:`Model`."""
    p = Parser(text)
    m = p.model()
    _check_declared(m)
    return m


def parse_expr(text: str) -> Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return e


def _check_declared(m: Model) -> None:
    from .desugar import walk_stmts, stmt_exprs, expr_names

    glob = {d.name for d in m.globals}
    defs = {d.name for d in m.defines}
    for proc in m.processes:
        known = glob | defs | {d.name for d in proc.locals}
        for s in walk_stmts(proc.body):
            for e in stmt_exprs(s):
                for name in expr_names(e):
                    if name not in known:
                        raise ParseError(f"undeclared identifier {name!r} in {proc.name}")
    for inl in m.inlines:
        known = glob | defs | set(inl.params) | {d.name for p in m.processes for d in p.locals}
        for s in walk_stmts(inl.body):
            for e in stmt_exprs(s):
                for name in expr_names(e):
                    if name not in known:
                        raise ParseError(f"undeclared identifier {name!r} in inline {inl.name}")
    for prop in m.props:
        from .desugar import ltl_atoms
        for a in ltl_atoms(prop.formula):
            for name in expr_names(a.expr):
                if name not in glob | defs:
                    raise ParseError(f"ltl {prop.name} refers to {name!r}, which is not a global")
            if _has_hole(a.expr):
                raise ParseError(f"ltl {prop.name} contains a hole")
