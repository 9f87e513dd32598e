"""AST for the modeling language.

Every statement carries a ``sid`` (a tuple of ints) that is excluded from
structural equality.  Parsed statements get one-element sids in source
order; derived statements extend the sid of the statement they come from
with a negative tag so that derived sids never collide with parsed ones:

* ``(-1,)`` inline expansion, followed by the body statement's sid
* ``(-2, hole, value)`` hole elimination
* ``(-3, index)`` ``select`` expansion
* ``(-4,)`` implicit fall-through branch of an ``#if``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..featexp import FeatExp, FeatureDecl

Sid = tuple[int, ...]

INLINE_TAG = -1
HOLE_TAG = -2
SELECT_TAG = -3
IFDEF_SKIP_TAG = -4

TYPE_RANGES = {
    "bit": (0, 1),
    "bool": (0, 1),
    "byte": (0, 255),
    "short": (-(2**15), 2**15 - 1),
    "int": (-(2**31), 2**31 - 1),
}


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnOp:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class ChanOp:
    op: str  # len | empty | full | nempty | nfull
    chan: str


@dataclass(frozen=True)
class Hole:
    id: int
    lo: Optional[int] = None
    hi: Optional[int] = None


@dataclass(frozen=True)
class Call:
    """Use of a parameterized ``#define`` (removed by desugaring)."""

    name: str
    args: tuple["Expr", ...]


Expr = Union[Num, BoolLit, Var, Index, BinOp, UnOp, ChanOp, Hole, Call]
LValue = Union[Var, Index, Call]


# -- statements --------------------------------------------------------------


def _sid() -> Sid:
    return field(default=(), compare=False)


@dataclass(frozen=True)
class Skip:
    sid: Sid = _sid()


@dataclass(frozen=True)
class Break:
    sid: Sid = _sid()


@dataclass(frozen=True)
class Else:
    """``else`` guard; only valid as the first statement of an option."""

    sid: Sid = _sid()


@dataclass(frozen=True)
class Assign:
    target: LValue
    value: Expr
    sid: Sid = _sid()


@dataclass(frozen=True)
class ExprStmt:
    """An expression used as a statement: blocks until it is non-zero."""

    expr: Expr
    sid: Sid = _sid()


@dataclass(frozen=True)
class Send:
    chan: str
    value: Expr
    sid: Sid = _sid()


@dataclass(frozen=True)
class Recv:
    chan: str
    target: LValue
    sid: Sid = _sid()


@dataclass(frozen=True)
class Assert:
    expr: Expr
    sid: Sid = _sid()


@dataclass(frozen=True)
class Seq:
    stmts: tuple["Stmt", ...]
    sid: Sid = _sid()


@dataclass(frozen=True)
class If:
    options: tuple[Seq, ...]
    sid: Sid = _sid()


@dataclass(frozen=True)
class Do:
    options: tuple[Seq, ...]
    sid: Sid = _sid()


@dataclass(frozen=True)
class IfDef:
    """Compile-time choice ``#if :: psi -> body ... #endif``."""

    branches: tuple[tuple[FeatExp, Seq], ...]
    sid: Sid = _sid()


@dataclass(frozen=True)
class JoinBranch:
    enabled: bool
    pc: FeatExp
    body: Seq


@dataclass(frozen=True)
class JoinIf:
    """Resolved ``#if`` of an abstract model.

    Branch guards are the literal truth values of the join abstraction;
    ``pc`` keeps the original presence condition so that counterexamples can
    be mapped back to feature expressions.
    """

    branches: tuple[JoinBranch, ...]
    sid: Sid = _sid()


@dataclass(frozen=True)
class InlineCall:
    name: str
    args: tuple[Expr, ...]
    sid: Sid = _sid()


@dataclass(frozen=True)
class Select:
    target: LValue
    lo: Expr
    hi: Expr
    sid: Sid = _sid()


Stmt = Union[
    Skip, Break, Else, Assign, ExprStmt, Send, Recv, Assert, Seq, If, Do, IfDef, JoinIf,
    InlineCall, Select,
]

BASIC_STMTS = (Skip, Break, Else, Assign, ExprStmt, Send, Recv, Assert, InlineCall, Select)


# -- LTL -----------------------------------------------------------------------


@dataclass(frozen=True)
class LAtom:
    expr: Expr


@dataclass(frozen=True)
class LConst:
    value: bool


@dataclass(frozen=True)
class LNot:
    arg: "Ltl"


@dataclass(frozen=True)
class LBin:
    op: str  # && || -> U V
    left: "Ltl"
    right: "Ltl"


@dataclass(frozen=True)
class LUn:
    op: str  # X [] <>
    arg: "Ltl"


Ltl = Union[LAtom, LConst, LNot, LBin, LUn]


@dataclass(frozen=True)
class LtlProp:
    name: str
    formula: Ltl


# -- declarations ----------------------------------------------------------------


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: str
    size: Optional[int] = None
    init: int = 0


@dataclass(frozen=True)
class ChanDecl:
    name: str
    capacity: int
    type: str = "int"


@dataclass(frozen=True)
class Define:
    name: str
    params: Optional[tuple[str, ...]]
    text: str


@dataclass(frozen=True)
class Inline:
    name: str
    params: tuple[str, ...]
    body: Seq


@dataclass(frozen=True)
class Process:
    name: str
    body: Seq
    locals: tuple[VarDecl, ...] = ()
    is_init: bool = False


@dataclass(frozen=True)
class Model:
    defines: tuple[Define, ...] = ()
    features: tuple[FeatureDecl, ...] = ()
    globals: tuple[Union[VarDecl, ChanDecl], ...] = ()
    inlines: tuple[Inline, ...] = ()
    processes: tuple[Process, ...] = ()
    props: tuple[LtlProp, ...] = ()

    def prop(self, name: str) -> LtlProp:
        for p in self.props:
            if p.name == name:
                return p
        raise KeyError(f"no ltl property named {name!r}")
