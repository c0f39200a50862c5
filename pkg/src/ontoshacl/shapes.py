"""Shape constraints: expression syntax, normal form, stratification.

The normal form restricts bodies to six cases: an individual, a shape
ref, a concept, a conjunction of two shape refs, a role-conjunction
existential over a shape ref, or a negated shape ref. ``normalize``
compiles the richer source grammar down to these, introducing fresh
shape names under a reserved prefix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple, Union

from .core import TOP, Role
from .paths import NFA, Regex, regex_str, regex_to_nfa

RESERVED_PREFIX = "_"


class UnguardedComparison(ValueError):
    """eq/disj without an individual guard cannot be compiled faithfully."""


# ---------------------------------------------------------------------------
# unary shape expressions


@dataclass(frozen=True)
class IndividualRef:
    name: str

    def __str__(self) -> str:
        return f"@{self.name}"


@dataclass(frozen=True)
class ShapeRef:
    name: str

    def __str__(self) -> str:
        return f"${self.name}"


@dataclass(frozen=True)
class NegShapeRef:
    name: str

    def __str__(self) -> str:
        return f"!${self.name}"


@dataclass(frozen=True)
class ConceptRef:
    name: str  # concept name or the top token

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Or:
    left: "ShapeBody"
    right: "ShapeBody"

    def __str__(self) -> str:
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class And:
    left: "ShapeBody"
    right: "ShapeBody"

    def __str__(self) -> str:
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Not:
    """General complement; not in the source grammar, used internally."""

    body: "ShapeBody"

    def __str__(self) -> str:
        return f"!({self.body})"


@dataclass(frozen=True)
class ExistsRoles:
    roles: FrozenSet[Role]
    body: "ShapeBody"

    def __str__(self) -> str:
        rs = ",".join(str(r) for r in sorted(self.roles))
        return f"some [{rs}].{self.body}"


@dataclass(frozen=True)
class ExistsPath:
    path: Regex
    body: "ShapeBody"

    def __str__(self) -> str:
        return f"some <{regex_str(self.path)}>.{self.body}"


@dataclass(frozen=True)
class GuardedEq:
    guard: Optional[str]  # individual name; None means unguarded (rejected)
    left: Regex
    right: Regex

    def __str__(self) -> str:
        # self-parenthesized so the guard survives reparsing in any context
        inner = f"eq(<{regex_str(self.left)}>,<{regex_str(self.right)}>)"
        return f"(@{self.guard} & {inner})" if self.guard else inner


@dataclass(frozen=True)
class GuardedDisj:
    guard: Optional[str]
    left: Regex
    right: Regex

    def __str__(self) -> str:
        inner = f"disj(<{regex_str(self.left)}>,<{regex_str(self.right)}>)"
        return f"(@{self.guard} & {inner})" if self.guard else inner


ShapeBody = Union[
    IndividualRef,
    ShapeRef,
    NegShapeRef,
    ConceptRef,
    Or,
    And,
    Not,
    ExistsRoles,
    ExistsPath,
    GuardedEq,
    GuardedDisj,
]


@dataclass(frozen=True)
class Constraint:
    head: str
    body: ShapeBody

    def __str__(self) -> str:
        return f"${self.head} <- {self.body}"


@dataclass(frozen=True)
class ShapesGraph:
    constraints: Tuple[Constraint, ...]
    targets: Tuple[Tuple[str, str], ...]  # (shape name, individual name)

    @staticmethod
    def of(
        constraints: Sequence[Constraint], targets: Sequence[Tuple[str, str]] = ()
    ) -> "ShapesGraph":
        return ShapesGraph(
            tuple(sorted(set(constraints), key=str)), tuple(sorted(set(targets)))
        )

    def shape_names(self) -> FrozenSet[str]:
        out: Set[str] = set()
        for c in self.constraints:
            out.add(c.head)
            out |= {n for n, _ in shape_occurrences(c.body)}
        out |= {s for s, _ in self.targets}
        return frozenset(out)

    def concept_names(self) -> FrozenSet[str]:
        out: Set[str] = set()
        for c in self.constraints:
            out |= _concepts_in(c.body)
        return frozenset(out - {TOP})


def _concepts_in(body: ShapeBody) -> Set[str]:
    if isinstance(body, ConceptRef):
        return {body.name}
    if isinstance(body, (Or, And)):
        return _concepts_in(body.left) | _concepts_in(body.right)
    if isinstance(body, Not):
        return _concepts_in(body.body)
    if isinstance(body, (ExistsRoles, ExistsPath)):
        return _concepts_in(body.body)
    return set()


def shape_occurrences(body: ShapeBody, negative: bool = False) -> Iterator[Tuple[str, bool]]:
    """Yield (shape name, occurs-negatively) pairs, including duplicates."""
    if isinstance(body, ShapeRef):
        yield body.name, negative
    elif isinstance(body, NegShapeRef):
        yield body.name, True
    elif isinstance(body, (Or, And)):
        yield from shape_occurrences(body.left, negative)
        yield from shape_occurrences(body.right, negative)
    elif isinstance(body, Not):
        yield from shape_occurrences(body.body, True)
    elif isinstance(body, (ExistsRoles, ExistsPath)):
        yield from shape_occurrences(body.body, negative)


def has_negation(body: ShapeBody) -> bool:
    """Anything non-monotone: shape complement or path comparison."""
    if isinstance(body, (NegShapeRef, Not, GuardedEq, GuardedDisj)):
        return True
    if isinstance(body, (Or, And)):
        return has_negation(body.left) or has_negation(body.right)
    if isinstance(body, (ExistsRoles, ExistsPath)):
        return has_negation(body.body)
    return False


# ---------------------------------------------------------------------------
# normal form


def is_normal(c: Constraint) -> bool:
    b = c.body
    if isinstance(b, (IndividualRef, ShapeRef, NegShapeRef, ConceptRef)):
        return True
    if isinstance(b, And):
        return isinstance(b.left, ShapeRef) and isinstance(b.right, ShapeRef)
    if isinstance(b, ExistsRoles):
        return bool(b.roles) and isinstance(b.body, (ShapeRef, NegShapeRef))
    return False


class _Namer:
    def __init__(self, taken: Set[str]):
        self.taken = set(taken)
        self.counter = 0

    def fresh(self, hint: str) -> str:
        while True:
            name = f"{RESERVED_PREFIX}{hint}{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


def normalize(sg: ShapesGraph) -> Tuple[ShapesGraph, Dict[str, str]]:
    """Compile to normal form; returns the new graph and aux-name origins."""
    out: List[Constraint] = []
    namer = _Namer(set(sg.shape_names()))
    origin: Dict[str, str] = {}

    def aux(body: ShapeBody, owner: str) -> str:
        if isinstance(body, ShapeRef):
            return body.name
        name = namer.fresh("s")
        origin[name] = owner
        compile_into(name, body, owner)
        return name

    def compile_into(head: str, body: ShapeBody, owner: str) -> None:
        if isinstance(body, (IndividualRef, ShapeRef, NegShapeRef, ConceptRef)):
            out.append(Constraint(head, body))
        elif isinstance(body, Or):
            compile_into(head, body.left, owner)
            compile_into(head, body.right, owner)
        elif isinstance(body, And):
            left = aux(body.left, owner)
            right = aux(body.right, owner)
            out.append(Constraint(head, And(ShapeRef(left), ShapeRef(right))))
        elif isinstance(body, Not):
            if isinstance(body.body, ShapeRef):
                out.append(Constraint(head, NegShapeRef(body.body.name)))
            else:
                out.append(Constraint(head, NegShapeRef(aux(body.body, owner))))
        elif isinstance(body, ExistsRoles):
            out.append(
                Constraint(head, ExistsRoles(body.roles, ShapeRef(aux(body.body, owner))))
            )
        elif isinstance(body, ExistsPath):
            nfa = regex_to_nfa(body.path)
            states = {q: namer.fresh("q") for q in range(nfa.n_states)}
            for q in states.values():
                origin[q] = owner
            out.append(Constraint(head, ShapeRef(states[nfa.initial])))
            for q, role, q2 in nfa.transitions:
                out.append(
                    Constraint(
                        states[q], ExistsRoles(frozenset({role}), ShapeRef(states[q2]))
                    )
                )
            for q, q2 in nfa.eps:
                out.append(Constraint(states[q], ShapeRef(states[q2])))
            out.append(Constraint(states[nfa.final], ShapeRef(aux(body.body, owner))))
        elif isinstance(body, (GuardedEq, GuardedDisj)):
            _compile_comparison(head, body, owner)
        else:
            raise TypeError(f"unknown body {body!r}")

    def _compile_comparison(head: str, body, owner: str) -> None:
        if body.guard is None:
            raise UnguardedComparison(
                "eq/disj must be guarded by an individual: without the guard, "
                "nodes reached over the two paths cannot be told apart"
            )
        left_nfa = regex_to_nfa(body.left)
        right_nfa = regex_to_nfa(body.right)
        sides = []
        for nfa in (left_nfa, right_nfa):
            states = {q: namer.fresh("q") for q in range(nfa.n_states)}
            for q in states.values():
                origin[q] = owner
            # forward marking from the guard along the automaton
            out.append(Constraint(states[nfa.initial], IndividualRef(body.guard)))
            for q, role, q2 in nfa.transitions:
                out.append(
                    Constraint(
                        states[q2],
                        ExistsRoles(frozenset({role.invert()}), ShapeRef(states[q])),
                    )
                )
            for q, q2 in nfa.eps:
                out.append(Constraint(states[q2], ShapeRef(states[q])))
            sides.append(states[nfa.final])
        err = namer.fresh("err")
        origin[err] = owner
        if isinstance(body, GuardedEq):
            pos = namer.fresh("pos")
            neg = namer.fresh("neg")
            origin[pos] = origin[neg] = owner
            out.append(Constraint(pos, ShapeRef(sides[0])))
            out.append(Constraint(pos, ShapeRef(sides[1])))
            out.append(Constraint(neg, NegShapeRef(sides[0])))
            out.append(Constraint(neg, NegShapeRef(sides[1])))
            out.append(Constraint(err, And(ShapeRef(pos), ShapeRef(neg))))
        else:
            out.append(Constraint(err, And(ShapeRef(sides[0]), ShapeRef(sides[1]))))
        alphabet = left_nfa.alphabet() | right_nfa.alphabet()
        for role in sorted(alphabet):
            out.append(Constraint(err, ExistsRoles(frozenset({role}), ShapeRef(err))))
        noerr = namer.fresh("ok")
        origin[noerr] = owner
        out.append(Constraint(noerr, NegShapeRef(err)))
        guard_shape = namer.fresh("at")
        origin[guard_shape] = owner
        out.append(Constraint(guard_shape, IndividualRef(body.guard)))
        out.append(Constraint(head, And(ShapeRef(guard_shape), ShapeRef(noerr))))

    for c in sg.constraints:
        compile_into(c.head, c.body, c.head)

    deduped = ShapesGraph.of(out, sg.targets)
    assert all(is_normal(c) for c in deduped.constraints)
    return deduped, origin


# ---------------------------------------------------------------------------
# stratification


@dataclass(frozen=True)
class Stratification:
    strata: Tuple[Tuple[Constraint, ...], ...]
    index: Tuple[Tuple[str, int], ...]  # shape name -> stratum

    def stratum_of(self, name: str) -> int:
        for n, i in self.index:
            if n == name:
                return i
        return 0

    def as_dict(self) -> Dict[str, int]:
        return dict(self.index)


class NotStratified(ValueError):
    def __init__(self, cycle: Tuple[str, ...]):
        pretty = " -> ".join(cycle + (cycle[0],)) if cycle else "?"
        super().__init__(f"negation inside a recursive cycle: {pretty}")
        self.cycle = cycle


def compute_stratification(constraints: Sequence[Constraint]) -> Stratification:
    """Layered peeling of the marked dependency graph.

    An edge s -> s' says s occurs in a body with head s'; it is marked
    when the occurrence is negative. A name may enter the current layer
    only if no name in its ancestry has an incoming marked edge.
    """
    constraints = sorted(set(constraints), key=str)
    names: Set[str] = set()
    edges: Set[Tuple[str, str]] = set()
    marked: Set[Tuple[str, str]] = set()
    for c in constraints:
        names.add(c.head)
        for occ, neg in shape_occurrences(c.body):
            names.add(occ)
            edges.add((occ, c.head))
            if neg:
                marked.add((occ, c.head))

    remaining = set(names)
    index: Dict[str, int] = {}
    level = 0
    while remaining:
        bad = {t for (s, t) in marked if s in remaining and t in remaining}
        # ancestors under plain edges, restricted to remaining names
        preds: Dict[str, Set[str]] = {n: set() for n in remaining}
        for s, t in edges:
            if s in remaining and t in remaining:
                preds[t].add(s)

        def tainted(n: str) -> bool:
            seen = set()
            work = [n]
            while work:
                x = work.pop()
                if x in bad:
                    return True
                for p in preds[x]:
                    if p not in seen:
                        seen.add(p)
                        work.append(p)
            return False

        layer = {n for n in sorted(remaining) if not tainted(n)}
        if not layer:
            raise NotStratified(_find_marked_cycle(remaining, edges, marked))
        for n in layer:
            index[n] = level
        remaining -= layer
        level += 1

    if not constraints:
        return Stratification((), ())
    n_strata = max(index[c.head] for c in constraints) + 1
    strata: List[List[Constraint]] = [[] for _ in range(n_strata)]
    for c in constraints:
        strata[index[c.head]].append(c)
    packed = tuple(tuple(s) for s in strata if s)
    # re-number after dropping empty layers
    renum: Dict[str, int] = {}
    for i, group in enumerate(packed):
        for c in group:
            renum[c.head] = i
    for n in index:
        if n not in renum:
            renum[n] = 0
    return Stratification(packed, tuple(sorted(renum.items())))


def _find_marked_cycle(
    remaining: Set[str], edges: Set[Tuple[str, str]], marked: Set[Tuple[str, str]]
) -> Tuple[str, ...]:
    adj: Dict[str, List[str]] = {n: [] for n in remaining}
    for s, t in edges:
        if s in remaining and t in remaining:
            adj[s].append(t)
    for s, t in sorted(marked):
        if s not in remaining or t not in remaining:
            continue
        # a path t ->* s closes the cycle through the marked edge (s, t)
        prev: Dict[str, Optional[str]] = {t: None}
        work = [t]
        while work:
            x = work.pop(0)
            if x == s:
                path = [s]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return tuple(reversed(path))
            for y in sorted(adj[x]):
                if y not in prev:
                    prev[y] = x
                    work.append(y)
        if s == t:
            return (s,)
    return tuple(sorted(remaining))[:1]
