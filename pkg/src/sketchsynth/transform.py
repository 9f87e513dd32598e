"""Source-to-source transformations between sketches, families and plain models."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from . import featexp as fx
from .lang.ast import (
    BASIC_STMTS, HOLE_TAG, IFDEF_SKIP_TAG, Hole, IfDef, JoinBranch, JoinIf, Model, Num, Seq, Skip, Stmt,
)
from .lang.desugar import (
    children, desugar, holes_in, ltl_atoms, map_expr, map_stmt, stmt_exprs, walk_stmts,
)


class TransformError(Exception):
    pass


HoleAssignment = Mapping[int, int]


@dataclass(frozen=True)
class HoleInfo:
    id: int
    feature: str
    lo: int
    hi: int


@dataclass(frozen=True)
class FamilyModel:
    """A hole-free model with ``#if`` blocks plus its configuration space."""

    model: Model
    space: fx.ConfigSpace
    holes: tuple[HoleInfo, ...] = field(default=())

    def feature_of(self, hole_id: int) -> str:
        for h in self.holes:
            if h.id == hole_id:
                return h.feature
        raise KeyError(hole_id)

    def assignment_of(self, k: fx.Config) -> dict[int, int]:
        return {h.id: k[h.feature] for h in self.holes}

    def config_of(self, h: HoleAssignment) -> fx.Config:
        return self.space.config(**{info.feature: h[info.id] for info in self.holes})


# ---------------------------------------------------------------------------


def model_holes(m: Model) -> list[Hole]:
    """Distinct holes of ``m`` ordered by id."""
    found: dict[int, Hole] = {}
    for p in m.processes:
        for s in walk_stmts(p.body):
            for e in stmt_exprs(s):
                for h in holes_in(e):
                    found.setdefault(h.id, h)
    return [found[i] for i in sorted(found)]


def hole_domain(h: Hole, default_bits: int) -> tuple[int, int]:
    if h.lo is not None:
        return h.lo, h.hi
    if not 1 <= default_bits <= 16:
        raise TransformError(f"bits must be within 1..16, got {default_bits}")
    return 0, 2 ** default_bits - 1


def _check_holes(m: Model) -> None:
    for prop in m.props:
        for atom in ltl_atoms(prop.formula):
            if holes_in(atom.expr):
                raise TransformError(f"hole inside ltl property {prop.name}")
    for p in m.processes:
        for s in walk_stmts(p.body):
            if isinstance(s, BASIC_STMTS):
                n = sum(len(holes_in(e)) for e in stmt_exprs(s))
                if n > 1:
                    raise TransformError(
                        f"statement {s.sid} contains {n} holes; split it so that each "
                        "statement has at most one hole")


def _plug(s: Stmt, hole_id: int, value: int) -> Stmt:
    def fe(e):
        return map_expr(e, lambda n: Num(value) if isinstance(n, Hole) and n.id == hole_id else None)

    return map_stmt(s, fe, lambda sid: sid + (HOLE_TAG, hole_id, value))


def _stmt_hole_ids(s: Stmt) -> list[int]:
    ids: list[int] = []
    for t in walk_stmts(s):
        for e in stmt_exprs(t):
            for h in holes_in(e):
                if h.id not in ids:
                    ids.append(h.id)
    return sorted(ids)


def _lift(s: Stmt, ids: list[int], info: Mapping[int, HoleInfo]) -> Stmt:
    if not ids:
        return s
    h = info[ids[0]]
    branches = tuple(
        (fx.eq(h.feature, v), Seq((_lift(_plug(s, h.id, v), ids[1:], info),)))
        for v in range(h.lo, h.hi + 1)
    )
    return IfDef(branches, s.sid)


def rewrite_holes(sketch: Model, default_bits: int = 3) -> FamilyModel:
    """Turn every hole into a fresh numerical feature.

    The hole's value must stay fixed for a whole run, so the outermost
    statement of the process body that contains a hole is duplicated once
    per hole value under an ``#if`` on the new feature.
    """
    m = desugar(sketch)
    _check_holes(m)
    holes = model_holes(m)
    taken = {f.name for f in m.features}
    names = ["A"] if len(holes) == 1 else [f"A{i}" for i in range(1, len(holes) + 1)]
    info: dict[int, HoleInfo] = {}
    for h, name in zip(holes, names):
        if name in taken:
            raise TransformError(f"feature name {name} already declared")
        lo, hi = hole_domain(h, default_bits)
        if lo > hi:
            raise TransformError(f"hole {h.id} has an empty domain [{lo},{hi}]")
        info[h.id] = HoleInfo(h.id, name, lo, hi)
    procs = []
    for p in m.processes:
        body = tuple(_lift(s, _stmt_hole_ids(s), info) for s in p.body.stmts)
        procs.append(replace(p, body=Seq(body, p.body.sid)))
    decls = tuple(m.features) + tuple(fx.FeatureDecl(i.feature, i.lo, i.hi) for i in info.values())
    fam = replace(m, features=decls, processes=tuple(procs))
    return FamilyModel(fam, fx.ConfigSpace(decls), tuple(info.values()))


def family_of(m: Model, validity: fx.FeatExp = fx.TRUE) -> FamilyModel:
    """Wrap a hand-written family (``feature`` declarations plus ``#if``)."""
    m = desugar(m)
    if model_holes(m):
        raise TransformError("model still contains holes; use rewrite_holes")
    space = fx.ConfigSpace(tuple(m.features), validity)
    declared = set(space.names)
    for p in m.processes:
        for s in walk_stmts(p.body):
            if isinstance(s, IfDef):
                for psi, _ in s.branches:
                    unknown = fx.features_of(psi) - declared
                    if unknown:
                        raise TransformError(f"undeclared feature(s) {sorted(unknown)} in #if")
    return FamilyModel(m, space)


def substitute(sketch: Model, h: HoleAssignment, default_bits: int = 3) -> Model:
    """Replace every hole by its value in ``h``."""
    m = desugar(sketch)
    holes = {x.id: x for x in model_holes(m)}
    missing = set(holes) - set(h)
    if missing:
        raise TransformError(f"no value for hole(s) {sorted(missing)}")
    for i, hole in holes.items():
        lo, hi = hole_domain(hole, default_bits)
        if not lo <= h[i] <= hi:
            raise TransformError(f"value {h[i]} outside the domain [{lo},{hi}] of hole {i}")

    def fe(e):
        return map_expr(e, lambda n: Num(h[n.id]) if isinstance(n, Hole) else None)

    procs = tuple(replace(p, body=map_stmt(p.body, fe)) for p in m.processes)
    return replace(m, processes=procs)


# ---------------------------------------------------------------------------


def _map_ifdefs(s: Stmt, ctx: fx.FeatExp, fn) -> Stmt:
    """Rebuild ``s`` applying ``fn(ifdef, ctx, recurse)`` to every IfDef."""
    rec = lambda t, c: _map_ifdefs(t, c, fn)
    if isinstance(s, IfDef):
        return fn(s, ctx, rec)
    if isinstance(s, Seq):
        return Seq(tuple(rec(t, ctx) for t in s.stmts), s.sid)
    if not children(s):
        return s
    if isinstance(s, JoinIf):
        return JoinIf(tuple(JoinBranch(b.enabled, b.pc, rec(b.body, _conj(ctx, b.pc)))
                            for b in s.branches), s.sid)
    return replace(s, options=tuple(rec(o, ctx) for o in s.options))


def _conj(a: fx.FeatExp, b: fx.FeatExp) -> fx.FeatExp:
    if a == fx.TRUE:
        return b
    if b == fx.TRUE:
        return a
    return fx.And(a, b)


def _map_model(m: Model, fn) -> Model:
    procs = tuple(replace(p, body=_map_ifdefs(p.body, fx.TRUE, fn)) for p in m.processes)
    return replace(m, processes=procs)


def project(fam: FamilyModel, psi: fx.FeatExp) -> FamilyModel:
    """Restrict the family to ``psi``; branches no longer realizable become ``false``."""
    space = fam.space.restrict(psi)

    def fn(s: IfDef, ctx: fx.FeatExp, rec) -> IfDef:
        out = []
        for g, body in s.branches:
            keep = fx.alpha_join(space, _conj(ctx, g))
            out.append((g if keep else fx.FALSE, rec(body, _conj(ctx, g))))
        return IfDef(tuple(out), s.sid)

    return FamilyModel(_map_model(fam.model, fn), space, fam.holes)


def abstract_join(fam: FamilyModel) -> Model:
    """Resolve every ``#if`` into a runtime choice among the realizable branches."""
    space = fam.space
    if space.is_empty():
        raise TransformError("cannot abstract an empty configuration space")

    def fn(s: IfDef, ctx: fx.FeatExp, rec) -> JoinIf:
        out = []
        for g, body in s.branches:
            on = fx.alpha_join(space, _conj(ctx, g))
            out.append(JoinBranch(on, g, rec(body, _conj(ctx, g))))
        rest = fx.Not(fx.disj(g for g, _ in s.branches))
        if fx.alpha_join(space, _conj(ctx, rest)):
            out.append(JoinBranch(True, rest, Seq((Skip(s.sid + (IFDEF_SKIP_TAG,)),))))
        return JoinIf(tuple(out), s.sid)

    return replace(_map_model(fam.model, fn), features=())


def characteristic(k: fx.Config) -> fx.FeatExp:
    return k.formula()
