"""Slow reference implementations the test suite compares against.

Everything here is deliberately naive: explicit fixpoints over atom
sets, exhaustive enumeration where instances are small enough, and a
from-scratch ground chase. None of it shares code with the package
beyond the plain AST types, so agreement is evidence rather than
tautology.
"""
from __future__ import annotations

import itertools
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from ontoshacl.core import (
    BOT,
    TOP,
    ABox,
    Individual,
    Interpretation,
    Node,
    Role,
    TBox,
    TwoType,
)
from ontoshacl.paths import RAlt, RSeq, RStar, RSym, Regex
from ontoshacl.shapes import (
    And,
    ConceptRef,
    Constraint,
    ExistsRoles,
    IndividualRef,
    Or,
    ShapeRef,
)
from ontoshacl.tbox import SaturatedTBox


# ---------------------------------------------------------------------------
# role hierarchy by brute-force reachability


def role_reach(tbox: TBox) -> Dict[Role, FrozenSet[Role]]:
    """Reflexive-transitive closure of the inclusion edges, both polarities."""
    roles: Set[Role] = set()
    for n in tbox.role_names():
        roles.add(Role(n))
        roles.add(Role(n, True))
    edges: Set[Tuple[Role, Role]] = set()
    for ax in tbox.roles:
        edges.add((ax.sub, ax.sup))
        edges.add((ax.sub.invert(), ax.sup.invert()))
    reach = {r: {r} for r in roles}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            for r in roles:
                if a in reach[r] and b not in reach[r]:
                    reach[r].add(b)
                    changed = True
    return {r: frozenset(v) for r, v in reach.items()}


def role_equiv_classes(tbox: TBox) -> List[FrozenSet[Role]]:
    """Mutual-reachability classes, the collapse targets."""
    reach = role_reach(tbox)
    classes: List[FrozenSet[Role]] = []
    for r in reach:
        cls = frozenset(s for s in reach if s in reach[r] and r in reach[s])
        if cls not in classes:
            classes.append(cls)
    return classes


# ---------------------------------------------------------------------------
# concept closure by plain iteration


def conj_close(tbox: TBox, concepts: Iterable[str]) -> FrozenSet[str]:
    out = {c for c in concepts if c != TOP}
    changed = True
    while changed:
        changed = False
        for ax in tbox.conj:
            if ax.lhs <= out and ax.rhs not in out:
                out.add(ax.rhs)
                changed = True
    return frozenset(out)


class _TypeTable:
    """Joint fixpoint over entailed concept sets, no counting axioms.

    E[S] is the set of concepts every node with base type S must carry.
    Growth comes from plain inclusions, from value restrictions pushed
    down a required child edge, and from value restrictions at a child
    pushed back up through an inverse role. Child filler sets are E
    entries themselves, so arbitrarily deep feedback settles in the one
    shared fixpoint.
    """

    def __init__(self, tbox: TBox):
        assert not tbox.atmost
        self.tbox = tbox
        self.reach = role_reach(tbox)
        self.table: Dict[FrozenSet[str], Set[str]] = {}

    def entailed(self, concepts: Iterable[str]) -> FrozenSet[str]:
        key = frozenset(c for c in concepts if c != TOP)
        self._settle(key)
        return frozenset(self.table[key])

    def pairs(
        self, concepts: Iterable[str]
    ) -> Set[Tuple[FrozenSet[Role], FrozenSet[str]]]:
        key = frozenset(c for c in concepts if c != TOP)
        self._settle(key)
        pairs = self._pairs_of(key)
        return {
            p
            for p in pairs
            if not any(q != p and p[0] <= q[0] and p[1] <= q[1] for q in pairs)
        }

    def _pairs_of(
        self, key: FrozenSet[str]
    ) -> List[Tuple[FrozenSet[Role], FrozenSet[str]]]:
        base = self.table[key]
        out = []
        for ax in self.tbox.exists:
            if ax.lhs != TOP and ax.lhs not in base:
                continue
            roles = self.reach.get(ax.role, frozenset({ax.role}))
            fillers = {ax.filler} - {TOP}
            for vx in self.tbox.value:
                if (vx.lhs == TOP or vx.lhs in base) and vx.role in roles:
                    fillers.add(vx.filler)
            child = self.table.setdefault(frozenset(fillers), set(fillers))
            out.append((roles, frozenset(child)))
        return out

    def _settle(self, key: FrozenSet[str]) -> None:
        self.table.setdefault(key, set(key))
        changed = True
        while changed:
            changed = False
            n_keys = len(self.table)
            for s in list(self.table):
                grown = set(conj_close(self.tbox, self.table[s]))
                for roles, child in self._pairs_of(s):
                    for vx in self.tbox.value:
                        if (
                            (vx.lhs == TOP or vx.lhs in child)
                            and vx.role.invert() in roles
                        ):
                            grown.add(vx.filler)
                if not grown <= self.table[s]:
                    self.table[s] |= grown
                    changed = True
            if len(self.table) != n_keys:
                changed = True


def brute_existentials(
    tbox: TBox, concepts: Iterable[str]
) -> Set[Tuple[FrozenSet[Role], FrozenSet[str]]]:
    """Maximal successor requirements, valid only without counting axioms."""
    return _TypeTable(tbox).pairs(concepts)


def brute_entailed(tbox: TBox, concepts: Iterable[str]) -> FrozenSet[str]:
    """Entailed concept memberships, valid only without counting axioms."""
    return _TypeTable(tbox).entailed(concepts)


# ---------------------------------------------------------------------------
# local consistency, each bullet checked verbatim


def locally_consistent_direct(sat: SaturatedTBox, t: TwoType, nc: Iterable[str]) -> bool:
    nc = set(nc) | {BOT}
    for side in (t.concepts, t.others):
        for b in nc:
            if sat.entails_conj(side, b) and b not in side:
                return False
    if BOT in t.concepts or BOT in t.others:
        return False
    for r in t.roles:
        for sup in sat.superroles(r):
            if sup not in t.roles:
                return False
    for ax in sat.tbox.value:
        if ax.filler == TOP:
            continue
        if (ax.lhs == TOP or ax.lhs in t.concepts) and ax.role in t.roles:
            if ax.filler not in t.others:
                return False
        if (ax.lhs == TOP or ax.lhs in t.others) and ax.role.invert() in t.roles:
            if ax.filler not in t.concepts:
                return False
    return True


# ---------------------------------------------------------------------------
# ground chase with equality repair; the consistency / completion oracle


class OracleBudgetExceeded(RuntimeError):
    pass


def find_ground_model(
    tbox: TBox, abox: ABox, max_rounds: int = 60, max_nodes: int = 120
) -> Optional[Tuple[Set[Tuple[str, str]], Set[Tuple[str, str, str]]]]:
    """Chase to a fixpoint; None means no model (clash or named merge).

    Nodes are strings; fresh witnesses get "?k" names. Counted roles are
    repaired by merging, with named individuals never merged into each
    other (distinct names denote distinct things here).
    """
    named = set(abox.individuals())
    parent: Dict[str, str] = {}

    def find(x: str) -> str:
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    def union(x: str, y: str) -> bool:
        x, y = find(x), find(y)
        if x == y:
            return True
        if x in named and y in named:
            return False
        if y in named:
            x, y = y, x
        parent[y] = x
        return True

    concepts: Set[Tuple[str, str]] = set(abox.concept_atoms)
    edges: Set[Tuple[str, str, str]] = set(abox.role_atoms)
    nodes: Set[str] = set(named)
    for _, x, y in abox.role_atoms:
        nodes.update({x, y})
    fired: Set[Tuple[str, int]] = set()
    fresh = itertools.count()

    def canon() -> None:
        nonlocal concepts, edges, nodes
        concepts = {(c, find(x)) for c, x in concepts}
        edges = {(r, find(x), find(y)) for r, x, y in edges}
        nodes = {find(x) for x in nodes}

    def ctype(x: str) -> Set[str]:
        return {c for c, y in concepts if y == x}

    def succ(x: str, role: Role) -> List[str]:
        if role.inverted:
            return sorted({a for r, a, b in edges if r == role.name and b == x})
        return sorted({b for r, a, b in edges if r == role.name and a == x})

    def add_edge(role: Role, x: str, y: str) -> None:
        if role.inverted:
            edges.add((role.name, y, x))
        else:
            edges.add((role.name, x, y))

    exists_list = list(tbox.exists)
    for _ in range(max_rounds):
        canon()
        if len(nodes) > max_nodes:
            raise OracleBudgetExceeded(f"{len(nodes)} nodes")
        before = (len(concepts), len(edges), len(nodes), len(parent))
        for ax in tbox.conj:
            for x in sorted(nodes):
                if ax.lhs <= ctype(x):
                    concepts.add((ax.rhs, x))
        if any(c == BOT for c, _ in concepts):
            return None
        for ax in tbox.roles:
            for r, x, y in sorted(edges):
                if Role(r) == ax.sub:
                    add_edge(ax.sup, x, y)
                elif Role(r, True) == ax.sub:
                    add_edge(ax.sup, y, x)
        for ax in tbox.value:
            for x in sorted(nodes):
                if ax.lhs == TOP or ax.lhs in ctype(x):
                    for y in succ(x, ax.role):
                        if ax.filler != TOP:
                            concepts.add((ax.filler, y))
        for i, ax in enumerate(exists_list):
            for x in sorted(nodes):
                if (x, i) in fired:
                    continue
                if ax.lhs == TOP or ax.lhs in ctype(x):
                    y = f"?{next(fresh)}"
                    nodes.add(y)
                    add_edge(ax.role, x, y)
                    if ax.filler != TOP:
                        concepts.add((ax.filler, y))
                    fired.add((x, i))
        for ax in tbox.atmost:
            for x in sorted(nodes):
                if ax.lhs != TOP and ax.lhs not in ctype(x):
                    continue
                wits = [
                    y
                    for y in succ(x, ax.role)
                    if ax.filler == TOP or ax.filler in ctype(y)
                ]
                if len(wits) >= 2:
                    if not union(wits[0], wits[1]):
                        return None
        canon()
        if (len(concepts), len(edges), len(nodes), len(parent)) == before:
            return concepts, edges
    raise OracleBudgetExceeded(f"no fixpoint in {max_rounds} rounds")


def check_ground_model(
    tbox: TBox, concepts: Set[Tuple[str, str]], edges: Set[Tuple[str, str, str]]
) -> bool:
    nodes = {x for _, x in concepts} | {x for _, x, y in edges} | {
        y for _, x, y in edges
    }

    def ctype(x: str) -> Set[str]:
        return {c for c, y in concepts if y == x}

    def succ(x: str, role: Role) -> List[str]:
        if role.inverted:
            return [a for r, a, b in edges if r == role.name and b == x]
        return [b for r, a, b in edges if r == role.name and a == x]

    if any(c == BOT for c, _ in concepts):
        return False
    for ax in tbox.conj:
        for x in nodes:
            if ax.lhs <= ctype(x) and ax.rhs != TOP and ax.rhs not in ctype(x):
                return False
    for ax in tbox.roles:
        for r, x, y in edges:
            if Role(r) == ax.sub:
                pair = (y, x) if ax.sup.inverted else (x, y)
                if (ax.sup.name, *pair) not in edges:
                    return False
            if Role(r, True) == ax.sub:
                pair = (x, y) if ax.sup.inverted else (y, x)
                if (ax.sup.name, *pair) not in edges:
                    return False
    for ax in tbox.value:
        for x in nodes:
            if ax.lhs == TOP or ax.lhs in ctype(x):
                for y in succ(x, ax.role):
                    if ax.filler != TOP and ax.filler not in ctype(y):
                        return False
    for ax in tbox.exists:
        for x in nodes:
            if ax.lhs == TOP or ax.lhs in ctype(x):
                ok = any(
                    ax.filler == TOP or ax.filler in ctype(y)
                    for y in succ(x, ax.role)
                )
                if not ok:
                    return False
    for ax in tbox.atmost:
        for x in nodes:
            if ax.lhs == TOP or ax.lhs in ctype(x):
                wits = {
                    y
                    for y in succ(x, ax.role)
                    if ax.filler == TOP or ax.filler in ctype(y)
                }
                if len(wits) > 1:
                    return False
    return True


def oracle_complete(
    tbox: TBox, abox: ABox
) -> Optional[Tuple[FrozenSet[Tuple[str, str]], FrozenSet[Tuple[str, str, str]]]]:
    """Entailed ground atoms via the chase, or None when inconsistent."""
    model = find_ground_model(tbox, abox)
    if model is None:
        return None
    concepts, edges = model
    named = set(abox.individuals())
    return (
        frozenset((c, x) for c, x in concepts if x in named and c != TOP),
        frozenset((r, x, y) for r, x, y in edges if x in named and y in named),
    )


# ---------------------------------------------------------------------------
# endomorphisms by exhaustive products


def naive_endos(interp: Interpretation) -> List[Dict[Node, Node]]:
    nodes = sorted(interp.nodes, key=str)
    anon = [n for n in nodes if not isinstance(n, Individual)]
    fixed = {n: n for n in nodes if isinstance(n, Individual)}
    out: List[Dict[Node, Node]] = []
    for image in itertools.product(nodes, repeat=len(anon)):
        m = dict(fixed)
        m.update(dict(zip(anon, image)))
        if all(
            (c, m[n]) in interp.concepts for c, n in interp.concepts
        ) and all((r, m[x], m[y]) in interp.edges for r, x, y in interp.edges):
            out.append(m)
    return out


# ---------------------------------------------------------------------------
# regex membership by derivatives


_EMPTY = RAlt(())
_EPSILON = RSeq(())


def _nullable(e: Regex) -> bool:
    if isinstance(e, RSym):
        return False
    if isinstance(e, RSeq):
        return all(_nullable(p) for p in e.parts)
    if isinstance(e, RAlt):
        return any(_nullable(o) for o in e.options)
    if isinstance(e, RStar):
        return True
    raise TypeError(e)


def _seq(parts: Sequence[Regex]) -> Regex:
    flat: List[Regex] = []
    for p in parts:
        if p == _EMPTY:
            return _EMPTY
        if isinstance(p, RSeq):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return _EPSILON
    return flat[0] if len(flat) == 1 else RSeq(tuple(flat))


def _alt(options: Sequence[Regex]) -> Regex:
    flat: List[Regex] = []
    for o in options:
        if isinstance(o, RAlt):
            flat.extend(x for x in o.options if x not in flat)
        elif o not in flat:
            flat.append(o)
    if not flat:
        return _EMPTY
    return flat[0] if len(flat) == 1 else RAlt(tuple(flat))


def _deriv(e: Regex, a: Role) -> Regex:
    if isinstance(e, RSym):
        return _EPSILON if e.role == a else _EMPTY
    if isinstance(e, RSeq):
        out: List[Regex] = []
        for i, p in enumerate(e.parts):
            out.append(_seq([_deriv(p, a)] + list(e.parts[i + 1 :])))
            if not _nullable(p):
                break
        return _alt(out) if out else _EMPTY
    if isinstance(e, RAlt):
        return _alt([_deriv(o, a) for o in e.options])
    if isinstance(e, RStar):
        return _seq([_deriv(e.inner, a), e])
    raise TypeError(e)


def regex_word_match(e: Regex, word: Sequence[Role]) -> bool:
    for a in word:
        e = _deriv(e, a)
        if e == _EMPTY:
            return False
    return _nullable(e)


# ---------------------------------------------------------------------------
# naive bottom-up evaluation of positive normal constraints


def naive_assignment(
    interp: Interpretation, constraints: Sequence[Constraint]
) -> FrozenSet[Tuple[str, Node]]:
    assign: Set[Tuple[str, Node]] = set()

    def sat_by(body, n: Node) -> bool:
        if isinstance(body, IndividualRef):
            return isinstance(n, Individual) and n.name == body.name
        if isinstance(body, ShapeRef):
            return (body.name, n) in assign
        if isinstance(body, ConceptRef):
            return body.name == TOP or interp.has_concept(body.name, n)
        if isinstance(body, And):
            return sat_by(body.left, n) and sat_by(body.right, n)
        if isinstance(body, Or):
            return sat_by(body.left, n) or sat_by(body.right, n)
        if isinstance(body, ExistsRoles):
            for m in interp.domain():
                if all(interp.has_edge(r, n, m) for r in body.roles) and sat_by(
                    body.body, m
                ):
                    return True
            return False
        raise TypeError(f"not positive: {body!r}")

    changed = True
    while changed:
        changed = False
        for c in constraints:
            for n in interp.domain():
                if (c.head, n) not in assign and sat_by(c.body, n):
                    assign.add((c.head, n))
                    changed = True
    return frozenset(assign)
