"""Fixpoint evaluation of shape constraints over finite interpretations.

The unary evaluator computes the perfect assignment stratum by stratum:
a least fixpoint of the immediate consequence operator, seeded with the
lower strata, reading negation as failure against them. A second
evaluator adds binary (edge) shapes with a path algebra; both unary and
binary atoms grow jointly in its fixpoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from .core import TOP, Individual, Interpretation, Node, Role, node_key
from .paths import NFA, Regex, regex_to_nfa
from .shapes import (
    And,
    ConceptRef,
    Constraint,
    ExistsPath,
    ExistsRoles,
    GuardedDisj,
    GuardedEq,
    IndividualRef,
    NegShapeRef,
    Not,
    Or,
    ShapeBody,
    ShapeRef,
    ShapesGraph,
    Stratification,
    UnguardedComparison,
    compute_stratification,
    has_negation,
)

Assignment = FrozenSet[Tuple[str, Node]]
BinAssignment = FrozenSet[Tuple[str, Node, Node]]


class TruncationRefused(RuntimeError):
    """Negation over a cut-off model approximation is unreliable."""


_nfa_memo: Dict[Regex, NFA] = {}


def _nfa(path: Regex) -> NFA:
    if path not in _nfa_memo:
        _nfa_memo[path] = regex_to_nfa(path)
    return _nfa_memo[path]


def _path_reach(interp: Interpretation, start: Node, nfa: NFA) -> FrozenSet[Node]:
    """Nodes reachable from start along words of the path language."""
    seen: Set[Tuple[Node, int]] = {(start, q) for q in nfa.eps_closure({nfa.initial})}
    work = list(seen)
    while work:
        n, q = work.pop()
        for a, r, b in nfa.transitions:
            if a != q:
                continue
            for m in interp.successors(n, r):
                for q2 in nfa.eps_closure({b}):
                    if (m, q2) not in seen:
                        seen.add((m, q2))
                        work.append((m, q2))
    return frozenset(n for n, q in seen if q == nfa.final)


# ---------------------------------------------------------------------------
# SHACL^b path algebra (binary shapes)


@dataclass(frozen=True)
class RoleStep:
    role: Role

    def __str__(self) -> str:
        return str(self.role)


@dataclass(frozen=True)
class BinRef:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Test:
    shape: str

    def __str__(self) -> str:
        return f"${self.shape}?"


@dataclass(frozen=True)
class PUnion:
    left: "PathExpr"
    right: "PathExpr"

    def __str__(self) -> str:
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class PInter:
    left: "PathExpr"
    right: "PathExpr"

    def __str__(self) -> str:
        return f"({self.left} ^ {self.right})"


@dataclass(frozen=True)
class PConcat:
    left: "PathExpr"
    right: "PathExpr"

    def __str__(self) -> str:
        return f"({self.left} . {self.right})"


@dataclass(frozen=True)
class PStar:
    inner: "PathExpr"

    def __str__(self) -> str:
        return f"({self.inner})*"


@dataclass(frozen=True)
class PInverse:
    inner: "PathExpr"

    def __str__(self) -> str:
        return f"({self.inner})-"


@dataclass(frozen=True)
class PDiff:
    left: "PathExpr"
    right: "PathExpr"

    def __str__(self) -> str:
        return f"({self.left} \\ {self.right})"


PathExpr = Union[RoleStep, BinRef, Test, PUnion, PInter, PConcat, PStar, PInverse, PDiff]


@dataclass(frozen=True)
class ExistsVia:
    """Unary body: some node reachable over a path-algebra expression."""

    path: PathExpr
    body: "ShapeBody"

    def __str__(self) -> str:
        return f"some ({self.path}).{self.body}"


@dataclass(frozen=True)
class BinConstraint:
    head: str
    body: PathExpr

    def __str__(self) -> str:
        return f"{self.head} <- {self.body}"


# ---------------------------------------------------------------------------
# expression evaluation


def eval_body(
    body: ShapeBody,
    interp: Interpretation,
    assign: Assignment,
    bin_assign: BinAssignment = frozenset(),
) -> FrozenSet[Node]:
    domain = frozenset(interp.nodes)
    if isinstance(body, IndividualRef):
        node = Individual(body.name)
        return frozenset({node}) if node in domain else frozenset()
    if isinstance(body, ShapeRef):
        return frozenset(n for s, n in assign if s == body.name)
    if isinstance(body, NegShapeRef):
        has = {n for s, n in assign if s == body.name}
        return frozenset(domain - has)
    if isinstance(body, ConceptRef):
        if body.name == TOP:
            return domain
        return frozenset(n for c, n in interp.concepts if c == body.name)
    if isinstance(body, Or):
        return eval_body(body.left, interp, assign, bin_assign) | eval_body(
            body.right, interp, assign, bin_assign
        )
    if isinstance(body, And):
        return eval_body(body.left, interp, assign, bin_assign) & eval_body(
            body.right, interp, assign, bin_assign
        )
    if isinstance(body, Not):
        return frozenset(domain - eval_body(body.body, interp, assign, bin_assign))
    if isinstance(body, ExistsRoles):
        targets = eval_body(body.body, interp, assign, bin_assign)
        out = set()
        for e in domain:
            for e2 in targets:
                if all(interp.has_edge(r, e, e2) for r in body.roles):
                    out.add(e)
                    break
        return frozenset(out)
    if isinstance(body, ExistsPath):
        targets = eval_body(body.body, interp, assign, bin_assign)
        nfa = _nfa(body.path)
        return frozenset(e for e in domain if _path_reach(interp, e, nfa) & targets)
    if isinstance(body, (GuardedEq, GuardedDisj)):
        if body.guard is None:
            raise UnguardedComparison(
                "eq/disj must be guarded by an individual: without the guard, "
                "nodes reached over the two paths cannot be told apart"
            )
        node = Individual(body.guard)
        if node not in domain:
            return frozenset()
        left = _path_reach(interp, node, _nfa(body.left))
        right = _path_reach(interp, node, _nfa(body.right))
        if isinstance(body, GuardedEq):
            ok = left == right
        else:
            ok = not (left & right)
        return frozenset({node}) if ok else frozenset()
    if isinstance(body, ExistsVia):
        pairs = eval_path(body.path, interp, assign, bin_assign)
        targets = eval_body(body.body, interp, assign, bin_assign)
        return frozenset(e for e, e2 in pairs if e2 in targets)
    raise TypeError(f"unknown body {body!r}")


def eval_path(
    p: PathExpr,
    interp: Interpretation,
    assign: Assignment,
    bin_assign: BinAssignment,
) -> FrozenSet[Tuple[Node, Node]]:
    if isinstance(p, RoleStep):
        out = set()
        for name, a, b in interp.edges:
            if name != p.role.name:
                continue
            out.add((b, a) if p.role.inverted else (a, b))
        return frozenset(out)
    if isinstance(p, BinRef):
        return frozenset((x, y) for b, x, y in bin_assign if b == p.name)
    if isinstance(p, Test):
        return frozenset((n, n) for s, n in assign if s == p.shape)
    if isinstance(p, PUnion):
        return eval_path(p.left, interp, assign, bin_assign) | eval_path(
            p.right, interp, assign, bin_assign
        )
    if isinstance(p, PInter):
        return eval_path(p.left, interp, assign, bin_assign) & eval_path(
            p.right, interp, assign, bin_assign
        )
    if isinstance(p, PDiff):
        return eval_path(p.left, interp, assign, bin_assign) - eval_path(
            p.right, interp, assign, bin_assign
        )
    if isinstance(p, PConcat):
        left = eval_path(p.left, interp, assign, bin_assign)
        right = eval_path(p.right, interp, assign, bin_assign)
        by_mid: Dict[Node, Set[Node]] = {}
        for x, y in left:
            by_mid.setdefault(y, set()).add(x)
        out = set()
        for y, z in right:
            for x in by_mid.get(y, ()):
                out.add((x, z))
        return frozenset(out)
    if isinstance(p, PInverse):
        return frozenset((y, x) for x, y in eval_path(p.inner, interp, assign, bin_assign))
    if isinstance(p, PStar):
        base = eval_path(p.inner, interp, assign, bin_assign)
        closure: Set[Tuple[Node, Node]] = {(n, n) for n in interp.nodes}
        closure |= base
        changed = True
        while changed:
            changed = False
            adj: Dict[Node, Set[Node]] = {}
            for x, y in closure:
                adj.setdefault(x, set()).add(y)
            add = set()
            for x, y in closure:
                for z in adj.get(y, ()):
                    if (x, z) not in closure:
                        add.add((x, z))
            if add:
                closure |= add
                changed = True
        return frozenset(closure)
    raise TypeError(f"unknown path {p!r}")


# ---------------------------------------------------------------------------
# unary fixpoints


def immediate_consequence(
    interp: Interpretation, constraints: Sequence[Constraint], assign: Assignment
) -> Assignment:
    out = set(assign)
    for c in constraints:
        for n in eval_body(c.body, interp, assign):
            out.add((c.head, n))
    return frozenset(out)


def _lfp(
    interp: Interpretation, constraints: Sequence[Constraint], start: Assignment
) -> Assignment:
    current = start
    while True:
        nxt = immediate_consequence(interp, constraints, current)
        if nxt == current:
            return current
        current = nxt


def perfect_assignment(interp: Interpretation, strat: Stratification) -> Assignment:
    current: Assignment = frozenset()
    for group in strat.strata:
        current = _lfp(interp, group, current)
    return current


@dataclass(frozen=True)
class TargetResult:
    shape: str
    node: str
    valid: bool


@dataclass(frozen=True)
class ValidationResult:
    targets: Tuple[TargetResult, ...]
    valid: bool
    lower_bound: bool  # evaluated over a truncated model, positive-only
    undefined_shapes: Tuple[str, ...]


def validate(interp: Interpretation, sg: ShapesGraph) -> ValidationResult:
    """Per-target verdicts from the perfect assignment."""
    strat = compute_stratification(sg.constraints)
    negation = any(has_negation(c.body) for c in sg.constraints)
    if not interp.complete and negation:
        raise TruncationRefused(
            "constraints use negation but the model is a truncated "
            "approximation; negative facts at the frontier are unreliable"
        )
    pa = perfect_assignment(interp, strat)
    named = {n.name: n for n in interp.named()}
    defined = {c.head for c in sg.constraints}
    results = []
    undefined = []
    for shape, ind in sg.targets:
        if shape not in defined:
            undefined.append(shape)
        node = named.get(ind)
        results.append(
            TargetResult(shape, ind, node is not None and (shape, node) in pa)
        )
    return ValidationResult(
        tuple(results),
        all(r.valid for r in results),
        not interp.complete,
        tuple(sorted(set(undefined))),
    )


# ---------------------------------------------------------------------------
# binary fixpoints


@dataclass(frozen=True)
class ShapeAssignmentB:
    unary: Assignment
    binary: BinAssignment


def _occurrences_b(
    item: Union[Constraint, BinConstraint]
) -> List[Tuple[str, bool]]:
    out: List[Tuple[str, bool]] = []

    def walk_body(b: ShapeBody, neg: bool) -> None:
        if isinstance(b, ShapeRef):
            out.append((b.name, neg))
        elif isinstance(b, NegShapeRef):
            out.append((b.name, True))
        elif isinstance(b, (Or, And)):
            walk_body(b.left, neg)
            walk_body(b.right, neg)
        elif isinstance(b, Not):
            walk_body(b.body, True)
        elif isinstance(b, (ExistsRoles, ExistsPath)):
            walk_body(b.body, neg)
        elif isinstance(b, ExistsVia):
            walk_path(b.path, neg)
            walk_body(b.body, neg)

    def walk_path(p: PathExpr, neg: bool) -> None:
        if isinstance(p, BinRef):
            out.append((p.name, neg))
        elif isinstance(p, Test):
            out.append((p.shape, neg))
        elif isinstance(p, (PUnion, PInter, PConcat)):
            walk_path(p.left, neg)
            walk_path(p.right, neg)
        elif isinstance(p, PDiff):
            walk_path(p.left, neg)
            walk_path(p.right, True)
        elif isinstance(p, (PStar, PInverse)):
            walk_path(p.inner, neg)

    if isinstance(item, Constraint):
        walk_body(item.body, False)
    else:
        walk_path(item.body, False)
    return out


def perfect_assignment_b(
    interp: Interpretation,
    constraints: Sequence[Union[Constraint, BinConstraint]],
) -> ShapeAssignmentB:
    """Joint unary/binary least fixpoint, stratum by stratum."""
    items = sorted(set(constraints), key=str)
    names: Set[str] = set()
    edges: Set[Tuple[str, str]] = set()
    marked: Set[Tuple[str, str]] = set()
    for it in items:
        names.add(it.head)
        for occ, neg in _occurrences_b(it):
            names.add(occ)
            edges.add((occ, it.head))
            if neg:
                marked.add((occ, it.head))

    # layered peeling, same discipline as the unary stratifier
    remaining = set(names)
    index: Dict[str, int] = {}
    level = 0
    while remaining:
        bad = {t for (s, t) in marked if s in remaining and t in remaining}
        preds: Dict[str, Set[str]] = {n: set() for n in remaining}
        for s, t in edges:
            if s in remaining and t in remaining:
                preds[t].add(s)

        def tainted(n: str) -> bool:
            seen: Set[str] = set()
            work = [n]
            while work:
                x = work.pop()
                if x in bad:
                    return True
                for pr in preds[x]:
                    if pr not in seen:
                        seen.add(pr)
                        work.append(pr)
            return False

        layer = {n for n in sorted(remaining) if not tainted(n)}
        if not layer:
            raise ValueError("binary constraint set is not stratified")
        for n in layer:
            index[n] = level
        remaining -= layer
        level += 1

    n_strata = (max(index[it.head] for it in items) + 1) if items else 0
    strata: List[List[Union[Constraint, BinConstraint]]] = [[] for _ in range(n_strata)]
    for it in items:
        strata[index[it.head]].append(it)

    unary: Set[Tuple[str, Node]] = set()
    binary: Set[Tuple[str, Node, Node]] = set()
    for group in strata:
        while True:
            before = (len(unary), len(binary))
            fu = frozenset(unary)
            fb = frozenset(binary)
            for it in group:
                if isinstance(it, Constraint):
                    for n in eval_body(it.body, interp, fu, fb):
                        unary.add((it.head, n))
                else:
                    for x, y in eval_path(it.body, interp, fu, fb):
                        binary.add((it.head, x, y))
            if (len(unary), len(binary)) == before:
                break
    return ShapeAssignmentB(frozenset(unary), frozenset(binary))
