"""Core vocabulary for Horn-SHIQ knowledge bases.

Concept names are plain strings starting with an uppercase letter; the
reserved tokens ``top`` and ``bot`` stand for the universal and empty
concept. Roles carry an inversion flag, so ``Role("p", True)`` is p
read backwards. ABoxes and interpretations store role atoms under the
non-inverted name only; lookups resolve inversion on the fly.

Everything here is immutable and orderable so that the rest of the
package can iterate deterministically.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple, Union

TOP = "top"
BOT = "bot"

RESERVED_CONCEPTS = frozenset({TOP, BOT})


# ---------------------------------------------------------------------------
# roles


@dataclass(frozen=True, order=True)
class Role:
    """A role name with polarity. ``invert`` is an involution."""

    name: str
    inverted: bool = False

    def invert(self) -> "Role":
        return Role(self.name, not self.inverted)

    def __str__(self) -> str:
        return "^" + self.name if self.inverted else self.name


def invert_role(role: Role) -> Role:
    return role.invert()


def invert_roles(roles: Iterable[Role]) -> FrozenSet[Role]:
    return frozenset(r.invert() for r in roles)


# ---------------------------------------------------------------------------
# axioms

# Normal form families:
#   ConjInclusion     A0 & ... & An <= B        (F1)
#   AtMostOne         A <= max1 r.B             (F2)
#   ValueRestriction  A <= only r.B             (F3)
#   ExistsInclusion   A <= some r.B             (F4)
#   RoleInclusion     r <= s


@dataclass(frozen=True)
class ConjInclusion:
    lhs: FrozenSet[str]
    rhs: str

    def __str__(self) -> str:
        left = " & ".join(sorted(self.lhs)) if self.lhs else TOP
        return f"{left} <= {self.rhs}"


@dataclass(frozen=True)
class AtMostOne:
    lhs: str
    role: Role
    filler: str

    def __str__(self) -> str:
        return f"{self.lhs} <= max1 {self.role}.{self.filler}"


@dataclass(frozen=True)
class ValueRestriction:
    lhs: str
    role: Role
    filler: str

    def __str__(self) -> str:
        return f"{self.lhs} <= only {self.role}.{self.filler}"


@dataclass(frozen=True)
class ExistsInclusion:
    lhs: str
    role: Role
    filler: str

    def __str__(self) -> str:
        return f"{self.lhs} <= some {self.role}.{self.filler}"


@dataclass(frozen=True)
class RoleInclusion:
    sub: Role
    sup: Role

    def __str__(self) -> str:
        return f"{self.sub} <= {self.sup}"


Axiom = Union[ConjInclusion, AtMostOne, ValueRestriction, ExistsInclusion, RoleInclusion]


def _conj_key(ax: ConjInclusion) -> Tuple:
    return (tuple(sorted(ax.lhs)), ax.rhs)


@dataclass(frozen=True)
class TBox:
    """A normalized Horn-SHIQ TBox, axioms sorted per family."""

    conj: Tuple[ConjInclusion, ...] = ()
    atmost: Tuple[AtMostOne, ...] = ()
    value: Tuple[ValueRestriction, ...] = ()
    exists: Tuple[ExistsInclusion, ...] = ()
    roles: Tuple[RoleInclusion, ...] = ()

    @staticmethod
    def of(axioms: Iterable[Axiom]) -> "TBox":
        conj: List[ConjInclusion] = []
        atmost: List[AtMostOne] = []
        value: List[ValueRestriction] = []
        exists: List[ExistsInclusion] = []
        roles: List[RoleInclusion] = []
        for ax in axioms:
            if isinstance(ax, ConjInclusion):
                # drop vacuous A <= top, normalize top out of premises
                lhs = frozenset(c for c in ax.lhs if c != TOP)
                if ax.rhs == TOP:
                    continue
                conj.append(ConjInclusion(lhs, ax.rhs))
            elif isinstance(ax, AtMostOne):
                atmost.append(ax)
            elif isinstance(ax, ValueRestriction):
                if ax.filler == TOP:
                    continue
                value.append(ax)
            elif isinstance(ax, ExistsInclusion):
                exists.append(ax)
            elif isinstance(ax, RoleInclusion):
                if ax.sub != ax.sup:
                    roles.append(ax)
            else:
                raise TypeError(f"not an axiom: {ax!r}")
        return TBox(
            conj=tuple(sorted(set(conj), key=_conj_key)),
            atmost=tuple(sorted(set(atmost), key=lambda a: (a.lhs, a.role, a.filler))),
            value=tuple(sorted(set(value), key=lambda a: (a.lhs, a.role, a.filler))),
            exists=tuple(sorted(set(exists), key=lambda a: (a.lhs, a.role, a.filler))),
            roles=tuple(sorted(set(roles), key=lambda a: (a.sub, a.sup))),
        )

    def axioms(self) -> Iterator[Axiom]:
        yield from self.conj
        yield from self.atmost
        yield from self.value
        yield from self.exists
        yield from self.roles

    def concept_names(self) -> FrozenSet[str]:
        """Concept names occurring in the TBox, reserved tokens excluded."""
        out = set()
        for ax in self.conj:
            out.update(ax.lhs)
            out.add(ax.rhs)
        for ax in (*self.atmost, *self.value, *self.exists):
            out.add(ax.lhs)
            out.add(ax.filler)
        return frozenset(out - RESERVED_CONCEPTS)

    def role_names(self) -> FrozenSet[str]:
        out = set()
        for ax in (*self.atmost, *self.value, *self.exists):
            out.add(ax.role.name)
        for ax in self.roles:
            out.add(ax.sub.name)
            out.add(ax.sup.name)
        return frozenset(out)

    def all_roles(self) -> Tuple[Role, ...]:
        """Both polarities of every role name, sorted."""
        names = sorted(self.role_names())
        return tuple(Role(n, inv) for n in names for inv in (False, True))


# ---------------------------------------------------------------------------
# ABoxes


@dataclass(frozen=True)
class ABox:
    """Concept and role assertions over named individuals.

    Role atoms are keyed by the non-inverted role name. Use
    :meth:`role_pairs` or :meth:`has_role` to query either polarity.
    """

    concept_atoms: FrozenSet[Tuple[str, str]] = frozenset()
    role_atoms: FrozenSet[Tuple[str, str, str]] = frozenset()

    @staticmethod
    def of(
        concepts: Iterable[Tuple[str, str]] = (),
        roles: Iterable[Tuple[Role, str, str]] = (),
    ) -> "ABox":
        catoms = frozenset((c, a) for c, a in concepts if c != TOP)
        ratoms = set()
        for role, a, b in roles:
            if role.inverted:
                ratoms.add((role.name, b, a))
            else:
                ratoms.add((role.name, a, b))
        return ABox(catoms, frozenset(ratoms))

    def individuals(self) -> Tuple[str, ...]:
        out = {a for _, a in self.concept_atoms}
        for _, a, b in self.role_atoms:
            out.add(a)
            out.add(b)
        return tuple(sorted(out))

    def concepts_of(self, a: str) -> FrozenSet[str]:
        return frozenset(c for c, x in self.concept_atoms if x == a)

    def has_role(self, role: Role, a: str, b: str) -> bool:
        if role.inverted:
            return (role.name, b, a) in self.role_atoms
        return (role.name, a, b) in self.role_atoms

    def role_pairs(self, role: Role) -> Iterator[Tuple[str, str]]:
        for name, a, b in sorted(self.role_atoms):
            if name == role.name:
                yield (b, a) if role.inverted else (a, b)

    def roles_between(self, a: str, b: str) -> FrozenSet[Role]:
        """All roles (either polarity) connecting a to b."""
        out = set()
        for name, x, y in self.role_atoms:
            if x == a and y == b:
                out.add(Role(name))
            if x == b and y == a:
                out.add(Role(name, True))
        return frozenset(out)

    def is_empty(self) -> bool:
        return not self.concept_atoms and not self.role_atoms


# ---------------------------------------------------------------------------
# 2-types and successor configurations


@dataclass(frozen=True)
class TwoType:
    """(pi1, pi2, pi3): concepts here, roles across, concepts there."""

    concepts: FrozenSet[str]
    roles: FrozenSet[Role]
    others: FrozenSet[str]

    def invert(self) -> "TwoType":
        return TwoType(self.others, invert_roles(self.roles), self.concepts)

    def __str__(self) -> str:
        c = ",".join(sorted(self.concepts))
        r = ",".join(str(x) for x in sorted(self.roles))
        o = ",".join(sorted(self.others))
        return "({%s},{%s},{%s})" % (c, r, o)


def invert_two_type(t: TwoType) -> TwoType:
    return t.invert()


def bare_type(concepts: Iterable[str]) -> TwoType:
    return TwoType(frozenset(concepts), frozenset(), frozenset())


@dataclass(frozen=True)
class OneHalfType:
    """A successor candidate: roles into the child and the child's concepts."""

    roles: FrozenSet[Role]
    concepts: FrozenSet[str]

    def subsumed_by(self, other: "OneHalfType") -> bool:
        return self.roles <= other.roles and self.concepts <= other.concepts

    def __str__(self) -> str:
        r = ",".join(str(x) for x in sorted(self.roles))
        c = ",".join(sorted(self.concepts))
        return "({%s},{%s})" % (r, c)


def type_key(t: TwoType) -> Tuple:
    return (tuple(sorted(t.concepts)), tuple(sorted(t.roles)), tuple(sorted(t.others)))


def half_type_key(u: OneHalfType) -> Tuple:
    return (tuple(sorted(u.roles)), tuple(sorted(u.concepts)))


# ---------------------------------------------------------------------------
# interpretations


@dataclass(frozen=True)
class Individual:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Anon:
    """An anonymous tree node: base individual plus a word of 2-type letters."""

    base: str
    path: Tuple[TwoType, ...]

    @property
    def depth(self) -> int:
        return len(self.path)

    def child(self, letter: TwoType) -> "Anon":
        return Anon(self.base, self.path + (letter,))

    def __str__(self) -> str:
        return f"{self.base}[{len(self.path)}]"


@dataclass(frozen=True)
class Null:
    """A labeled null introduced by the chase.

    The key encodes which axiom fired at which parent, so refiring the
    same trigger reproduces the same null instead of a fresh one.
    """

    key: str

    def __str__(self) -> str:
        return f"_n:{self.key}"


Node = Union[Individual, Anon, Null]


def node_key(n: Node) -> Tuple:
    if isinstance(n, Individual):
        return (0, n.name)
    if isinstance(n, Anon):
        return (1, n.base, len(n.path), tuple(type_key(t) for t in n.path))
    return (2, n.key)


@dataclass(frozen=True)
class Interpretation:
    """A finite (fragment of an) interpretation.

    ``complete`` records whether this is the whole intended structure or a
    truncation of something deeper.
    """

    nodes: FrozenSet[Node]
    concepts: FrozenSet[Tuple[str, Node]]
    edges: FrozenSet[Tuple[str, Node, Node]]
    complete: bool = True

    @staticmethod
    def of(
        nodes: Iterable[Node],
        concepts: Iterable[Tuple[str, Node]] = (),
        edges: Iterable[Tuple[Role, Node, Node]] = (),
        complete: bool = True,
    ) -> "Interpretation":
        eatoms = set()
        for role, x, y in edges:
            if role.inverted:
                eatoms.add((role.name, y, x))
            else:
                eatoms.add((role.name, x, y))
        catoms = frozenset((c, n) for c, n in concepts if c != TOP)
        return Interpretation(frozenset(nodes), catoms, frozenset(eatoms), complete)

    @staticmethod
    def from_abox(abox: ABox, complete: bool = True) -> "Interpretation":
        nodes = {a: Individual(a) for a in abox.individuals()}
        return Interpretation(
            frozenset(nodes.values()),
            frozenset((c, nodes[a]) for c, a in abox.concept_atoms),
            frozenset((r, nodes[a], nodes[b]) for r, a, b in abox.role_atoms),
            complete,
        )

    def domain(self) -> List[Node]:
        return sorted(self.nodes, key=node_key)

    def named(self) -> List[Individual]:
        return [n for n in self.domain() if isinstance(n, Individual)]

    def concepts_of(self, n: Node) -> FrozenSet[str]:
        return frozenset(c for c, x in self.concepts if x == n)

    def has_concept(self, c: str, n: Node) -> bool:
        if c == TOP:
            return n in self.nodes
        return (c, n) in self.concepts

    def has_edge(self, role: Role, x: Node, y: Node) -> bool:
        if role.inverted:
            return (role.name, y, x) in self.edges
        return (role.name, x, y) in self.edges

    def successors(self, x: Node, role: Role) -> List[Node]:
        out = []
        for name, a, b in self.edges:
            if role.inverted:
                if name == role.name and b == x:
                    out.append(a)
            else:
                if name == role.name and a == x:
                    out.append(b)
        return sorted(set(out), key=node_key)

    def roles_between(self, x: Node, y: Node) -> FrozenSet[Role]:
        out = set()
        for name, a, b in self.edges:
            if a == x and b == y:
                out.add(Role(name))
            if a == y and b == x:
                out.add(Role(name, True))
        return frozenset(out)

    def role_names(self) -> FrozenSet[str]:
        return frozenset(name for name, _, _ in self.edges)

    def concept_names(self) -> FrozenSet[str]:
        return frozenset(c for c, _ in self.concepts)

    def restrict(self, keep: Iterable[Node]) -> "Interpretation":
        keep = frozenset(keep)
        return Interpretation(
            keep,
            frozenset((c, n) for c, n in self.concepts if n in keep),
            frozenset((r, a, b) for r, a, b in self.edges if a in keep and b in keep),
            self.complete,
        )
