"""LTL to Büchi automata by the on-the-fly tableau construction.

Formulas are first brought into negation normal form over ``X``, ``U`` and
``R``; the tableau yields a generalized Büchi automaton with one acceptance
set per until-subformula, which is then degeneralized with a counter.

The automaton is state-labeled: a run reading ``w0 w1 ...`` visits states
``q0 q1 ...`` with ``q0`` initial and ``wi`` satisfying the label of ``qi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .lang.ast import Expr, LAtom, LBin, LConst, Ltl, LNot, LtlProp, LUn

# NNF formulas are tuples: ("true",) ("false",) ("lit", atom, positive)
# ("and", a, b) ("or", a, b) ("X", a) ("U", a, b) ("R", a, b)
Nnf = tuple
TRUE: Nnf = ("true",)
FALSE: Nnf = ("false",)

Literal = tuple[int, bool]


@dataclass(frozen=True)
class BuchiAutomaton:
    atoms: tuple[Expr, ...]
    labels: tuple[frozenset[Literal], ...]
    initial: tuple[int, ...]
    succ: tuple[tuple[int, ...], ...]
    accepting: frozenset[int]

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def admits(self, q: int, valuation: Sequence[bool]) -> bool:
        return all(valuation[a] == pol for a, pol in self.labels[q])

    def is_empty(self) -> bool:
        return not self.initial


class _Atoms:
    def __init__(self) -> None:
        self.exprs: list[Expr] = []

    def index(self, e: Expr) -> int:
        if e not in self.exprs:
            self.exprs.append(e)
        return self.exprs.index(e)


def to_nnf(f: Ltl, atoms: _Atoms, neg: bool = False) -> Nnf:
    if isinstance(f, LConst):
        return TRUE if f.value != neg else FALSE
    if isinstance(f, LAtom):
        return ("lit", atoms.index(f.expr), not neg)
    if isinstance(f, LNot):
        return to_nnf(f.arg, atoms, not neg)
    if isinstance(f, LUn):
        a = to_nnf(f.arg, atoms, neg)
        if f.op == "X":
            return ("X", a)
        always = (f.op == "[]") != neg
        return ("R", FALSE, a) if always else ("U", TRUE, a)
    if isinstance(f, LBin):
        if f.op == "->":
            return to_nnf(LBin("||", LNot(f.left), f.right), atoms, neg)
        a, b = to_nnf(f.left, atoms, neg), to_nnf(f.right, atoms, neg)
        dual = {"&&": "or", "||": "and", "U": "R", "V": "U"}
        plain = {"&&": "and", "||": "or", "U": "U", "V": "R"}
        return ((dual if neg else plain)[f.op], a, b)
    raise TypeError(f"not an LTL formula: {f!r}")


def _negate_lit(f: Nnf) -> Nnf:
    return ("lit", f[1], not f[2])


def _subformulas(f: Nnf) -> Iterable[Nnf]:
    yield f
    for c in f[1:]:
        if isinstance(c, tuple):
            yield from _subformulas(c)


@dataclass
class _Node:
    name: int
    incoming: set
    new: set
    old: set
    next: set


def _tableau(phi: Nnf) -> list[_Node]:
    nodes: list[_Node] = []
    counter = [0]

    def fresh() -> int:
        counter[0] += 1
        return counter[0]

    # explicit work list keeps the expansion deterministic and stack-safe
    work = [_Node(fresh(), {0}, {phi}, set(), set())]
    while work:
        node = work.pop()
        if not node.new:
            for nd in nodes:
                if nd.old == node.old and nd.next == node.next:
                    nd.incoming |= node.incoming
                    break
            else:
                nodes.append(node)
                work.append(_Node(fresh(), {node.name}, set(node.next), set(), set()))
            continue
        eta = min(node.new, key=repr)
        node.new.discard(eta)
        if eta in node.old:
            work.append(node)
            continue
        kind = eta[0]
        if kind in ("true", "false", "lit"):
            if eta == FALSE or (kind == "lit" and _negate_lit(eta) in node.old):
                continue
            node.old.add(eta)
            work.append(node)
        elif kind == "and":
            node.new |= {eta[1], eta[2]} - node.old
            node.old.add(eta)
            work.append(node)
        elif kind == "X":
            node.next.add(eta[1])
            node.old.add(eta)
            work.append(node)
        else:
            if kind == "or":
                first, second, nxt = {eta[1]}, {eta[2]}, set()
            elif kind == "U":
                first, second, nxt = {eta[1]}, {eta[2]}, {eta}
            else:  # R
                first, second, nxt = {eta[2]}, {eta[1], eta[2]}, {eta}
            old = node.old | {eta}
            n1 = _Node(fresh(), set(node.incoming), node.new | (first - node.old), set(old),
                       node.next | nxt)
            n2 = _Node(fresh(), set(node.incoming), node.new | (second - node.old), set(old),
                       set(node.next))
            # pushed in reverse so that the first alternative is expanded first
            work.append(n2)
            work.append(n1)
    return nodes


def ltl_to_buchi(prop: LtlProp | Ltl) -> BuchiAutomaton:
    """Büchi automaton accepting exactly the words that violate ``prop``."""
    formula = prop.formula if isinstance(prop, LtlProp) else prop
    atoms = _Atoms()
    phi = to_nnf(formula, atoms, neg=True)
    nodes = _tableau(phi)
    untils = sorted({f for f in _subformulas(phi) if f[0] == "U"}, key=repr)
    acc_sets = [{i for i, n in enumerate(nodes) if u not in n.old or u[2] in n.old} for u in untils]
    if not acc_sets:
        acc_sets = [set(range(len(nodes)))]
    k = len(acc_sets)
    index = {n.name: i for i, n in enumerate(nodes)}
    preds = [sorted(index[p] for p in n.incoming if p != 0) for n in nodes]
    labels_n = [frozenset((f[1], f[2]) for f in n.old if f[0] == "lit") for n in nodes]

    # degeneralize: product state (node, level) numbered node * k + level
    succ_n: list[list[int]] = [[] for _ in nodes]
    for j, ps in enumerate(preds):
        for i in ps:
            succ_n[i].append(j)
    labels, succ = [], []
    for i in range(len(nodes)):
        for level in range(k):
            labels.append(labels_n[i])
            nxt_level = (level + 1) % k if i in acc_sets[level] else level
            succ.append(tuple(j * k + nxt_level for j in sorted(succ_n[i])))
    initial = tuple(i * k for i, n in enumerate(nodes) if 0 in n.incoming)
    accepting = frozenset(i * k for i in acc_sets[0])
    return _trim(BuchiAutomaton(tuple(atoms.exprs), tuple(labels), initial, tuple(succ), accepting))


def _trim(a: BuchiAutomaton) -> BuchiAutomaton:
    """Drop states unreachable from the initial ones and renumber."""
    seen: list[int] = []
    stack = list(a.initial)
    marked = set(stack)
    while stack:
        q = stack.pop()
        seen.append(q)
        for r in a.succ[q]:
            if r not in marked:
                marked.add(r)
                stack.append(r)
    order = sorted(seen)
    new = {q: i for i, q in enumerate(order)}
    return BuchiAutomaton(
        a.atoms,
        tuple(a.labels[q] for q in order),
        tuple(new[q] for q in a.initial),
        tuple(tuple(new[r] for r in a.succ[q]) for q in order),
        frozenset(new[q] for q in a.accepting if q in new),
    )


def accepts_lasso(a: BuchiAutomaton, stem: Sequence[Sequence[bool]],
                  cycle: Sequence[Sequence[bool]]) -> bool:
    """Whether ``a`` accepts the ultimately periodic word ``stem cycle^ω``."""
    if not cycle:
        raise ValueError("cycle must be nonempty")
    word = list(stem) + list(cycle)
    n, loop = len(word), len(stem)

    def nxt(pos: int) -> int:
        return pos + 1 if pos + 1 < n else loop

    # configurations (state, position); look for a reachable accepting cycle
    init = [(q, 0) for q in a.initial if a.admits(q, word[0])]
    graph: dict[tuple[int, int], list[tuple[int, int]]] = {}
    stack, seen = list(init), set(init)
    while stack:
        c = stack.pop()
        q, pos = c
        p2 = nxt(pos)
        outs = [(r, p2) for r in a.succ[q] if a.admits(r, word[p2])]
        graph[c] = outs
        for d in outs:
            if d not in seen:
                seen.add(d)
                stack.append(d)
    for c in seen:
        if c[0] in a.accepting and _reaches(graph, c, c):
            return True
    return False


def _reaches(graph, src, dst) -> bool:
    stack, seen = list(graph[src]), set()
    while stack:
        c = stack.pop()
        if c == dst:
            return True
        if c not in seen:
            seen.add(c)
            stack.extend(graph[c])
    return False
