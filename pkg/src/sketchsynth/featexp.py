"""Feature expressions over bounded integer features and the constraint kernel.

Sets of configurations are kept as canonical interval trees: level ``i`` of a
tree is a sorted tuple of ``(lo, hi, child)`` pieces over feature ``i``, with
adjacent pieces merged whenever their children are equal.  The leaf level is
``True`` (present) and the empty set is ``()`` at every level.  Because the
representation is canonical, structural equality of trees is set equality,
and flattening a tree yields the box list in lexicographic order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence, Union

EQ = "="
LT = "<"


class FeatureError(ValueError):
    """Raised for malformed feature expressions or spaces."""


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Atom:
    feature: str
    rel: str
    const: int

    def __post_init__(self) -> None:
        if self.rel not in (EQ, LT):
            raise FeatureError(f"unknown relation {self.rel!r}")

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Not:
    arg: "FeatExp"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class And:
    left: "FeatExp"
    right: "FeatExp"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Or:
    left: "FeatExp"
    right: "FeatExp"

    def __str__(self) -> str:
        return render(self)


FeatExp = Union[Const, Atom, Not, And, Or]

TRUE = Const(True)
FALSE = Const(False)


def eq(feature: str, n: int) -> Atom:
    return Atom(feature, EQ, n)


def lt(feature: str, n: int) -> Atom:
    return Atom(feature, LT, n)


def conj(parts: Iterable[FeatExp]) -> FeatExp:
    """Left-nested conjunction; ``TRUE`` for an empty sequence."""
    out: FeatExp | None = None
    for p in parts:
        out = p if out is None else And(out, p)
    return TRUE if out is None else out


def disj(parts: Iterable[FeatExp]) -> FeatExp:
    out: FeatExp | None = None
    for p in parts:
        out = p if out is None else Or(out, p)
    return FALSE if out is None else out


def conjuncts(psi: FeatExp) -> list[FeatExp]:
    """Flatten nested ``And`` nodes, dropping literal ``true``."""
    if isinstance(psi, And):
        return conjuncts(psi.left) + conjuncts(psi.right)
    if psi == TRUE:
        return []
    return [psi]


def is_literal(psi: FeatExp) -> bool:
    return isinstance(psi, Atom) or (isinstance(psi, Not) and isinstance(psi.arg, Atom))


def literal_atom(psi: FeatExp) -> Atom:
    return psi.arg if isinstance(psi, Not) else psi  # type: ignore[return-value]


def features_of(psi: FeatExp) -> set[str]:
    if isinstance(psi, Atom):
        return {psi.feature}
    if isinstance(psi, Not):
        return features_of(psi.arg)
    if isinstance(psi, (And, Or)):
        return features_of(psi.left) | features_of(psi.right)
    return set()


def simplify(psi: FeatExp) -> FeatExp:
    """Constant folding, double negation and duplicate-conjunct removal.

    Contradictions are deliberately *not* folded to ``false``: a spurious
    counterexample must keep its conflicting atoms for interpolation.
    """
    if isinstance(psi, Not):
        arg = simplify(psi.arg)
        if isinstance(arg, Const):
            return Const(not arg.value)
        if isinstance(arg, Not):
            return arg.arg
        return Not(arg)
    if isinstance(psi, And):
        parts: list[FeatExp] = []
        for p in conjuncts(simplify(psi.left)) + conjuncts(simplify(psi.right)):
            if p == FALSE:
                return FALSE
            if p not in parts:
                parts.append(p)
        return conj(parts)
    if isinstance(psi, Or):
        left, right = simplify(psi.left), simplify(psi.right)
        if TRUE in (left, right):
            return TRUE
        if left == FALSE:
            return right
        if right == FALSE or left == right:
            return left
        return Or(left, right)
    return psi


# ---------------------------------------------------------------------------
# Spaces and configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureDecl:
    name: str
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise FeatureError(f"empty domain for feature {self.name}: [{self.lo},{self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True)
class Config:
    """Total assignment of values to the features of a space."""

    items: tuple[tuple[str, int], ...]

    @classmethod
    def of(cls, mapping: Mapping[str, int]) -> "Config":
        return cls(tuple(mapping.items()))

    def __getitem__(self, name: str) -> int:
        for k, v in self.items:
            if k == name:
                return v
        raise KeyError(name)

    def __contains__(self, name: object) -> bool:
        return any(k == name for k, _ in self.items)

    def as_dict(self) -> dict[str, int]:
        return dict(self.items)

    def formula(self) -> FeatExp:
        """Characteristic formula ``(A1=k(A1)) && ... && (An=k(An))``."""
        return conj(eq(k, v) for k, v in self.items)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}:{v}" for k, v in self.items) + "}"


Box = tuple[tuple[int, int], ...]
Tree = Union[bool, tuple]


@dataclass(frozen=True)
class ConfigSpace:
    features: tuple[FeatureDecl, ...] = ()
    validity: FeatExp = TRUE

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise FeatureError(f"duplicate feature names in {names}")
        unknown = features_of(self.validity) - set(names)
        if unknown:
            raise FeatureError(f"validity references undeclared feature(s) {sorted(unknown)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise FeatureError(f"unknown feature {name!r}")

    @cached_property
    def domain_tree(self) -> Tree:
        return _full(self.features, 0)

    @cached_property
    def member_tree(self) -> Tree:
        return _tree(self, self.validity)

    @property
    def size(self) -> int:
        return _count(self.member_tree, len(self.features), 0)

    def is_empty(self) -> bool:
        return _is_empty(self.member_tree, len(self.features))

    def members(self) -> Iterator[Config]:
        for box in _flatten(self.member_tree, len(self.features), 0):
            yield from _box_points(self, box)

    def restrict(self, psi: FeatExp) -> "ConfigSpace":
        """Sub-space ``[[psi]] ∩ K`` with validity rewritten in box-DNF."""
        tree = _inter(self.member_tree, _tree(self, psi), len(self.features), 0)
        return self.with_tree(tree)

    def with_tree(self, tree: Tree) -> "ConfigSpace":
        boxes = _flatten(tree, len(self.features), 0)
        space = ConfigSpace(self.features, boxes_to_featexp(self, boxes))
        space.__dict__["member_tree"] = tree
        return space

    def config(self, **values: int) -> Config:
        return Config(tuple((f.name, values[f.name]) for f in self.features))


def space_of(**domains: tuple[int, int]) -> ConfigSpace:
    """Convenience constructor: ``space_of(A=(0, 7), B=(0, 3))``."""
    return ConfigSpace(tuple(FeatureDecl(n, lo, hi) for n, (lo, hi) in domains.items()))


# ---------------------------------------------------------------------------
# Interval trees
# ---------------------------------------------------------------------------


def _full(features: Sequence[FeatureDecl], i: int) -> Tree:
    if i == len(features):
        return True
    f = features[i]
    return ((f.lo, f.hi, _full(features, i + 1)),)


def _is_empty(t: Tree, n: int) -> bool:
    return t == () or t is False


def _normalize(pieces: list[tuple[int, int, Tree]]) -> tuple:
    out: list[tuple[int, int, Tree]] = []
    for lo, hi, child in pieces:
        if child == () or child is False:
            continue
        if out and out[-1][1] == lo - 1 and out[-1][2] == child:
            out[-1] = (out[-1][0], hi, child)
        else:
            out.append((lo, hi, child))
    return tuple(out)


def _inter(a: Tree, b: Tree, n: int, i: int) -> Tree:
    if i == n:
        return a is True and b is True
    if not a or not b:
        return ()
    pieces = []
    j = k = 0
    while j < len(a) and k < len(b):
        alo, ahi, ac = a[j]
        blo, bhi, bc = b[k]
        lo, hi = max(alo, blo), min(ahi, bhi)
        if lo <= hi:
            child = _inter(ac, bc, n, i + 1)
            if not _is_empty(child, n):
                pieces.append((lo, hi, child))
        if ahi < bhi:
            j += 1
        else:
            k += 1
    return _normalize(pieces)


def _union(a: Tree, b: Tree, n: int, i: int) -> Tree:
    if i == n:
        return a is True or b is True
    if not a:
        return b
    if not b:
        return a
    cuts = sorted({p[0] for p in a + b} | {p[1] + 1 for p in a + b})
    pieces = []
    for lo, nxt in zip(cuts, cuts[1:]):
        hi = nxt - 1
        ca = next((c for l, h, c in a if l <= lo and hi <= h), ())
        cb = next((c for l, h, c in b if l <= lo and hi <= h), ())
        if i + 1 == n:
            ca = ca if ca is True else False
            cb = cb if cb is True else False
            child: Tree = ca or cb
        else:
            child = _union(ca, cb, n, i + 1)
        pieces.append((lo, hi, child))
    return _normalize(pieces)


def _complement(t: Tree, features: Sequence[FeatureDecl], i: int) -> Tree:
    n = len(features)
    if i == n:
        return not (t is True)
    f = features[i]
    pieces = []
    cursor = f.lo
    for lo, hi, child in t or ():
        if cursor < lo:
            pieces.append((cursor, lo - 1, _full(features, i + 1)))
        pieces.append((lo, hi, _complement(child, features, i + 1)))
        cursor = hi + 1
    if cursor <= f.hi:
        pieces.append((cursor, f.hi, _full(features, i + 1)))
    if i + 1 == n:
        pieces = [(lo, hi, c if c is True else ()) for lo, hi, c in pieces]
    return _normalize(pieces)


def _interval_tree(features: Sequence[FeatureDecl], j: int, lo: int, hi: int) -> Tree:
    f = features[j]
    lo, hi = max(lo, f.lo), min(hi, f.hi)
    if lo > hi:
        return ()

    def build(i: int) -> Tree:
        if i == len(features):
            return True
        g = features[i]
        if i == j:
            return ((lo, hi, build(i + 1)),)
        return ((g.lo, g.hi, build(i + 1)),)

    return build(0)


def _tree(space: ConfigSpace, psi: FeatExp) -> Tree:
    feats = space.features
    n = len(feats)
    if isinstance(psi, Const):
        return space.domain_tree if psi.value else (() if n else False)
    if isinstance(psi, Atom):
        j = space.index(psi.feature)
        if psi.rel == EQ:
            return _interval_tree(feats, j, psi.const, psi.const)
        return _interval_tree(feats, j, feats[j].lo, psi.const - 1)
    if isinstance(psi, Not):
        return _complement(_tree(space, psi.arg), feats, 0)
    if isinstance(psi, And):
        return _inter(_tree(space, psi.left), _tree(space, psi.right), n, 0)
    if isinstance(psi, Or):
        return _union(_tree(space, psi.left), _tree(space, psi.right), n, 0)
    raise FeatureError(f"not a feature expression: {psi!r}")


def _flatten(t: Tree, n: int, i: int) -> list[Box]:
    if i == n:
        return [()] if t is True else []
    out: list[Box] = []
    for lo, hi, child in t or ():
        for rest in _flatten(child, n, i + 1):
            out.append(((lo, hi),) + rest)
    return out


def _count(t: Tree, n: int, i: int) -> int:
    if i == n:
        return 1 if t is True else 0
    return sum((hi - lo + 1) * _count(c, n, i + 1) for lo, hi, c in t or ())


def _first(t: Tree, n: int, i: int) -> tuple[int, ...] | None:
    if i == n:
        return () if t is True else None
    if not t:
        return None
    lo, _, child = t[0]
    rest = _first(child, n, i + 1)
    return None if rest is None else (lo,) + rest


def _box_points(space: ConfigSpace, box: Box) -> Iterator[Config]:
    names = space.names

    def rec(i: int, acc: tuple[int, ...]) -> Iterator[Config]:
        if i == len(box):
            yield Config(tuple(zip(names, acc)))
            return
        lo, hi = box[i]
        for v in range(lo, hi + 1):
            yield from rec(i + 1, acc + (v,))

    yield from rec(0, ())


# ---------------------------------------------------------------------------
# Kernel operations
# ---------------------------------------------------------------------------


def evaluate(psi: FeatExp, k: Config | Mapping[str, int]) -> bool:
    """Truth of ``psi`` under configuration ``k``."""
    if isinstance(psi, Const):
        return psi.value
    if isinstance(psi, Atom):
        try:
            v = k[psi.feature]
        except KeyError:
            raise FeatureError(f"feature {psi.feature!r} is not assigned") from None
        return v == psi.const if psi.rel == EQ else v < psi.const
    if isinstance(psi, Not):
        return not evaluate(psi.arg, k)
    if isinstance(psi, And):
        return evaluate(psi.left, k) and evaluate(psi.right, k)
    if isinstance(psi, Or):
        return evaluate(psi.left, k) or evaluate(psi.right, k)
    raise FeatureError(f"not a feature expression: {psi!r}")


def region(space: ConfigSpace, psi: FeatExp) -> Tree:
    """Canonical tree of ``[[psi]] ∩ K``."""
    return _inter(space.member_tree, _tree(space, psi), len(space.features), 0)


def sat(space: ConfigSpace, psi: FeatExp) -> Config | None:
    """Lexicographically smallest member of ``[[psi]] ∩ K``, or ``None``."""
    point = _first(region(space, psi), len(space.features), 0)
    if point is None:
        return None
    return Config(tuple(zip(space.names, point)))


def alpha_join(space: ConfigSpace, psi: FeatExp) -> bool:
    return sat(space, psi) is not None


def count(space: ConfigSpace, psi: FeatExp = TRUE) -> int:
    return _count(region(space, psi), len(space.features), 0)


def to_boxes(space: ConfigSpace, psi: FeatExp) -> list[Box]:
    return _flatten(region(space, psi), len(space.features), 0)


def interval_exp(name: str, lo: int, hi: int) -> FeatExp:
    if lo == hi:
        return eq(name, lo)
    return And(Not(lt(name, lo)), lt(name, hi + 1))


def box_to_featexp(space: ConfigSpace, box: Box) -> FeatExp:
    return conj(interval_exp(f.name, lo, hi) for f, (lo, hi) in zip(space.features, box))


def boxes_to_featexp(space: ConfigSpace, boxes: Sequence[Box]) -> FeatExp:
    if not space.features:
        return TRUE if boxes else FALSE
    return disj(box_to_featexp(space, b) for b in boxes)


def split(space: ConfigSpace, target: FeatExp) -> list[FeatExp]:
    """Partition ``[[target]] ∩ K`` into box-shaped sub-families."""
    return [box_to_featexp(space, b) for b in to_boxes(space, target)]


def _conj_sat(space: ConfigSpace, parts: Sequence[FeatExp]) -> bool:
    n = len(space.features)
    t = space.member_tree
    if _is_empty(t, n):
        return False
    for p in parts:
        t = _inter(t, _tree(space, p), n, 0)
        if _is_empty(t, n):
            return False
    return True


def unsat_core(space: ConfigSpace, atoms: Sequence[FeatExp]) -> list[FeatExp]:
    """Deletion-based minimal unsatisfiable subset of ``atoms`` within ``K``."""
    if _conj_sat(space, atoms):
        raise FeatureError("conjunction is satisfiable; no unsat core exists")
    core = list(atoms)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1 :]
        if not _conj_sat(space, trial):
            core = trial
        else:
            i += 1
    return core


def _literal_key(space: ConfigSpace, lit: FeatExp) -> tuple[int, int]:
    feats = features_of(lit)
    idx = min((space.index(f) for f in feats), default=-1)
    const = literal_atom(lit).const if is_literal(lit) else 0
    return idx, const


def interpolate(space: ConfigSpace, psi: FeatExp) -> FeatExp:
    """Refinement predicate separating the conflicting parts of a spurious trace.

    Returns a core conjunct ``c`` such that ``c`` and ``!c`` split ``K`` into two
    strictly smaller halves; whenever some core pair is jointly unsatisfiable
    within ``K``, the chosen ``c`` has a partner that conflicts with it, so each
    half loses at least one transition of the trace.
    """
    parts = conjuncts(psi)
    if _conj_sat(space, parts):
        raise FeatureError(f"{render(psi)} is satisfiable within the space")
    core = unsat_core(space, parts)
    ordered = sorted(core, key=lambda c: _literal_key(space, c))
    for c in ordered:
        if any(d is not c and not _conj_sat(space, [c, d]) for d in core):
            return c
    return ordered[0]


# ---------------------------------------------------------------------------
# Textual syntax
# ---------------------------------------------------------------------------

_PREC = {Or: 1, And: 2}


def render(psi: FeatExp) -> str:
    if isinstance(psi, Const):
        return "true" if psi.value else "false"
    if isinstance(psi, Atom):
        return f"{psi.feature}{psi.rel}{psi.const}"
    if isinstance(psi, Not):
        inner = render(psi.arg)
        return f"!{inner}" if isinstance(psi.arg, Const) else f"!({inner})"
    op = " && " if isinstance(psi, And) else " || "
    prec = _PREC[type(psi)]

    def side(e: FeatExp) -> str:
        s = render(e)
        return f"({s})" if type(e) in _PREC and _PREC[type(e)] < prec else s

    return side(psi.left) + op + side(psi.right)


def render_box(space: ConfigSpace, box: Box) -> str:
    return " && ".join(f"{lo}<={f.name}<={hi}" for f, (lo, hi) in zip(space.features, box)) or "true"


_TOKEN = re.compile(r"\s*(?:(\d+|-\d+)|([A-Za-z_]\w*)|(&&|\|\||<=|[!()=<]))")


def parse(text: str) -> FeatExp:
    """Parse ``true``, ``A=3``, ``A<3``, ``!e``, ``e && e``, ``e || e``, and
    box constraints ``lo<=A<=hi``."""
    tokens: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FeatureError(f"bad character in feature expression at {pos}: {text[pos:]!r}")
        tokens.append(m.group(m.lastindex))
        pos = m.end()
    tokens.append("")
    i = 0

    def peek() -> str:
        return tokens[i]

    def take(expected: str | None = None) -> str:
        nonlocal i
        tok = tokens[i]
        if expected is not None and tok != expected:
            raise FeatureError(f"expected {expected!r}, found {tok or 'end of input'!r}")
        i += 1
        return tok

    def p_or() -> FeatExp:
        e = p_and()
        while peek() == "||":
            take()
            e = Or(e, p_and())
        return e

    def p_and() -> FeatExp:
        e = p_unary()
        while peek() == "&&":
            take()
            e = And(e, p_unary())
        return e

    def p_unary() -> FeatExp:
        tok = peek()
        if tok == "!":
            take()
            return Not(p_unary())
        if tok == "(":
            take()
            e = p_or()
            take(")")
            return e
        if tok in ("true", "false"):
            take()
            return Const(tok == "true")
        if re.fullmatch(r"-?\d+", tok):
            lo = int(take())
            take("<=")
            name = take()
            take("<=")
            hi = int(take())
            return interval_exp(name, lo, hi)
        if re.fullmatch(r"[A-Za-z_]\w*", tok):
            name = take()
            rel = take()
            if rel not in (EQ, LT):
                raise FeatureError(f"expected '=' or '<' after {name}")
            return Atom(name, rel, int(take()))
        raise FeatureError(f"unexpected token {tok or 'end of input'!r}")

    e = p_or()
    if peek() != "":
        raise FeatureError(f"trailing input {peek()!r}")
    return e
