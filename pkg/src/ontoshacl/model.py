"""Canonical model machinery.

``complete_abox`` closes the data graph under the TBox (the named part
of the core universal model). ``build_can`` grows the anonymous part
breadth-first up to a depth bound, tracking whether the result is the
whole model or a truncation.

Anonymous nodes are words over 2-type letters. A letter (X, R, Y) says:
the parent satisfies exactly X, the edge into the child carries exactly
the roles R, and the child satisfies exactly Y.
"""
from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .core import (
    BOT,
    TOP,
    ABox,
    Anon,
    Individual,
    Interpretation,
    Node,
    OneHalfType,
    Role,
    TBox,
    TwoType,
    bare_type,
    half_type_key,
    type_key,
)
from .tbox import SaturatedTBox, saturate

# Selftest mutation hook: when true, the subsumption filter in succ_config is
# skipped, which breaks the austere-model guarantees in a detectable way.
INJECT_SUCC_FILTER_BUG = False


class InconsistentKB(ValueError):
    pass


# ---------------------------------------------------------------------------
# ABox completion


def _complete(
    tbox: TBox, abox: ABox, sat: Optional[SaturatedTBox] = None
) -> Tuple[ABox, Optional[str]]:
    sat = sat or saturate(tbox)
    concepts: Set[Tuple[str, str]] = set(abox.concept_atoms)
    edges: Set[Tuple[str, str, str]] = set(abox.role_atoms)
    individuals = sorted(set(abox.individuals()))

    def ctype(a: str) -> FrozenSet[str]:
        return frozenset(c for c, x in concepts if x == a)

    def add_edge(role: Role, a: str, b: str) -> None:
        if role.inverted:
            edges.add((role.name, b, a))
        else:
            edges.add((role.name, a, b))

    def successors(a: str, role: Role) -> List[str]:
        if role.inverted:
            return sorted({x for n, x, y in edges if n == role.name and y == a})
        return sorted({y for n, x, y in edges if n == role.name and x == a})

    changed = True
    while changed:
        changed = False
        before = (len(concepts), len(edges))
        # role hierarchy closure
        for name, a, b in sorted(edges):
            for sup in sat.superroles(Role(name)):
                add_edge(sup, a, b)
        # entailed concept closure
        for a in individuals:
            for c in sat.cl(ctype(a)):
                concepts.add((c, a))
        # value restrictions
        for ax in tbox.value:
            for a in individuals:
                if ax.lhs != TOP and (ax.lhs, a) not in concepts:
                    continue
                for b in successors(a, ax.role):
                    concepts.add((ax.filler, b))
        # at-most-one: an implied existential merges onto an existing witness
        for ax in tbox.atmost:
            for a in individuals:
                if ax.lhs != TOP and (ax.lhs, a) not in concepts:
                    continue
                for cand in sat.implied_existentials(ctype(a)):
                    if ax.role not in cand.roles:
                        continue
                    if ax.filler != TOP and ax.filler not in cand.concepts:
                        continue
                    for b in successors(a, ax.role):
                        if ax.filler != TOP and (ax.filler, b) not in concepts:
                            continue
                        for c in cand.concepts:
                            concepts.add((c, b))
                        for r in cand.roles:
                            add_edge(r, a, b)
        if (len(concepts), len(edges)) != before:
            changed = True

    # consistency: bottom membership
    for a in individuals:
        if (BOT, a) in concepts:
            return ABox(frozenset(concepts), frozenset(edges)), f"bot holds at {a}"
    # consistency: two distinct named witnesses under a counted role
    for ax in tbox.atmost:
        for a in individuals:
            if ax.lhs != TOP and (ax.lhs, a) not in concepts:
                continue
            wits = [
                b
                for b in successors(a, ax.role)
                if ax.filler == TOP or (ax.filler, b) in concepts
            ]
            if len(wits) > 1:
                return (
                    ABox(frozenset(concepts), frozenset(edges)),
                    f"{a} has {len(wits)} named {ax.role}.{ax.filler} successors "
                    f"but at most one is allowed",
                )
    return ABox(frozenset(concepts), frozenset(edges)), None


def complete_abox(tbox: TBox, abox: ABox, sat: Optional[SaturatedTBox] = None) -> ABox:
    completed, failure = _complete(tbox, abox, sat)
    if failure is not None:
        raise InconsistentKB(failure)
    return completed


def completion_failure(tbox: TBox, abox: ABox) -> Optional[str]:
    """None when consistent, else a human-readable reason."""
    _, failure = _complete(tbox, abox)
    return failure


# ---------------------------------------------------------------------------
# successor configurations


def succ_config(
    sat: SaturatedTBox, types: Iterable[TwoType]
) -> Tuple[OneHalfType, ...]:
    """Successor candidates still owed by a node with the given 2-types.

    All types must agree on their first component (they describe one
    node). A candidate is dropped when some given 2-type already
    witnesses it.
    """
    ts = sorted(set(types), key=type_key)
    if not ts:
        raise ValueError("need at least one 2-type")
    first = ts[0].concepts
    for t in ts[1:]:
        if t.concepts != first:
            raise ValueError("2-types describe different nodes")
    cands = sat.implied_existentials(first)
    if INJECT_SUCC_FILTER_BUG:
        return cands
    out = [
        u
        for u in cands
        if not any(u.roles <= t.roles and u.concepts <= t.others for t in ts)
    ]
    return tuple(sorted(out, key=half_type_key))


def children(sat: SaturatedTBox, t: TwoType) -> Tuple[TwoType, ...]:
    """Letters that may follow letter t in an anonymous word."""
    out = [
        TwoType(t.others, u.roles, u.concepts)
        for u in succ_config(sat, [t.invert()])
    ]
    return tuple(sorted(out, key=type_key))


def root_frontier(sat: SaturatedTBox, completed: ABox, a: str) -> Tuple[TwoType, ...]:
    """The 2-types a named individual presents to the successor computation."""
    mine = completed.concepts_of(a)
    out = [bare_type(mine)]
    for b in completed.individuals():
        roles = completed.roles_between(a, b)
        if roles:
            out.append(TwoType(mine, roles, completed.concepts_of(b)))
    return tuple(sorted(set(out), key=type_key))


# ---------------------------------------------------------------------------
# finite approximations of the core universal model


def build_can(
    tbox: TBox, abox: ABox, depth: int = 0, sat: Optional[SaturatedTBox] = None
) -> Interpretation:
    """Approximation of the core universal model up to the given depth.

    Depth counts anonymous letters: 0 is just the completed data graph.
    The returned ``complete`` flag is true iff nothing was cut off.
    """
    sat = sat or saturate(tbox)
    completed = complete_abox(tbox, abox, sat)
    nodes: Set[Node] = set()
    concepts: Set[Tuple[str, Node]] = set()
    edges: Set[Tuple[str, Node, Node]] = set()

    named: Dict[str, Individual] = {a: Individual(a) for a in completed.individuals()}
    nodes.update(named.values())
    for c, a in completed.concept_atoms:
        concepts.add((c, named[a]))
    for r, a, b in completed.role_atoms:
        edges.add((r, named[a], named[b]))

    def attach(parent: Node, child: Anon, letter: TwoType) -> None:
        nodes.add(child)
        for c in letter.others:
            concepts.add((c, child))
        for r in letter.roles:
            if r.inverted:
                edges.add((r.name, child, parent))
            else:
                edges.add((r.name, parent, child))

    complete = True
    frontier: List[Anon] = []
    for a in completed.individuals():
        cands = succ_config(sat, root_frontier(sat, completed, a))
        if depth == 0:
            if cands:
                complete = False
            continue
        mine = completed.concepts_of(a)
        for u in cands:
            letter = TwoType(mine, u.roles, u.concepts)
            child = Anon(a, (letter,))
            attach(named[a], child, letter)
            frontier.append(child)

    while frontier:
        w = frontier.pop(0)
        tail = w.path[-1]
        if w.depth == depth:
            if children(sat, tail):
                complete = False
            continue
        for letter in children(sat, tail):
            child = w.child(letter)
            attach(w, child, letter)
            frontier.append(child)

    return Interpretation(frozenset(nodes), frozenset(concepts), frozenset(edges), complete)


# ---------------------------------------------------------------------------
# model checking


def is_model(tbox: TBox, abox: ABox, interp: Interpretation) -> bool:
    """Does the interpretation satisfy every axiom and every ABox atom?"""
    named = {n.name: n for n in interp.named()}
    for c, a in abox.concept_atoms:
        if a not in named or not interp.has_concept(c, named[a]):
            return False
    for r, a, b in abox.role_atoms:
        if a not in named or b not in named:
            return False
        if (r, named[a], named[b]) not in interp.edges:
            return False

    domain = interp.domain()
    for ax in tbox.conj:
        for x in domain:
            if ax.lhs <= interp.concepts_of(x):
                if ax.rhs == BOT or not interp.has_concept(ax.rhs, x):
                    return False
    for ax in tbox.value:
        for x in domain:
            if ax.lhs != TOP and not interp.has_concept(ax.lhs, x):
                continue
            for y in interp.successors(x, ax.role):
                if not interp.has_concept(ax.filler, y):
                    return False
    for ax in tbox.exists:
        for x in domain:
            if ax.lhs != TOP and not interp.has_concept(ax.lhs, x):
                continue
            if not any(
                interp.has_concept(ax.filler, y) for y in interp.successors(x, ax.role)
            ):
                return False
    for ax in tbox.atmost:
        for x in domain:
            if ax.lhs != TOP and not interp.has_concept(ax.lhs, x):
                continue
            wits = [
                y
                for y in interp.successors(x, ax.role)
                if ax.filler == TOP or interp.has_concept(ax.filler, y)
            ]
            if len(set(wits)) > 1:
                return False
    for ax in tbox.roles:
        for name, x, y in interp.edges:
            if Role(name) == ax.sub:
                if not interp.has_edge(ax.sup, x, y):
                    return False
            if Role(name, True) == ax.sub:
                if not interp.has_edge(ax.sup, y, x):
                    return False
    return True
