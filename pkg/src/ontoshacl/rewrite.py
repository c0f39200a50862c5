"""Rewriting shape constraints so TBox reasoning happens inside the shapes.

The rewriter saturates a set of quadruples (2-type, holds-set P, fails-set
Q, derived shape literals H) describing border nodes of the tree-shaped
model part. From the saturated set it emits plain constraints that are
evaluated over the completed data graph alone. Two pure variants push the
completion itself into constraints: one for TBoxes without counting
axioms, one using binary (edge) shapes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .core import BOT, TOP, OneHalfType, Role, TwoType, type_key
from .evaluate import BinConstraint, BinRef, ExistsVia, PConcat, PInter, PInverse, RoleStep, Test
from .model import succ_config
from .shapes import (
    And,
    ConceptRef,
    Constraint,
    ExistsRoles,
    IndividualRef,
    NegShapeRef,
    Not,
    ShapeBody,
    ShapeRef,
    ShapesGraph,
    Stratification,
)
from .tbox import SaturatedTBox, UnsupportedPattern, _key_exist


def _role_str(roles: FrozenSet[Role]) -> str:
    return "[" + ",".join(str(r) for r in sorted(roles)) + "]"


@dataclass(frozen=True)
class BasicConceptExpr:
    """Witness expression: some successor over all roles carrying all concepts."""

    roles: FrozenSet[Role]
    concepts: FrozenSet[str]

    def __str__(self) -> str:
        inner = " & ".join(sorted(self.concepts)) if self.concepts else TOP
        return f"some {_role_str(self.roles)}.({inner})"


@dataclass(frozen=True)
class BasicShapeExpr:
    """Witness expression over a shape literal: some successor over all
    roles satisfying the shape (or failing it, when neg is set)."""

    roles: FrozenSet[Role]
    shape: str
    neg: bool = False

    def __str__(self) -> str:
        bang = "!" if self.neg else ""
        return f"some {_role_str(self.roles)}.{bang}${self.shape}"


@dataclass(frozen=True)
class IndRef:
    name: str

    def __str__(self) -> str:
        return f"@{self.name}"


Entry = Union[BasicConceptExpr, BasicShapeExpr, IndRef]


def _entry_key(e: Entry) -> Tuple[int, str]:
    if isinstance(e, BasicConceptExpr):
        return (0, str(e))
    if isinstance(e, BasicShapeExpr):
        return (1, str(e))
    return (2, str(e))


@dataclass(frozen=True, order=True)
class Lit:
    """A shape literal: the name, possibly negated."""

    name: str
    neg: bool = False

    def __str__(self) -> str:
        return ("!" if self.neg else "") + self.name


@dataclass(frozen=True)
class Quadruple:
    t: TwoType
    p: FrozenSet[Entry]
    q: FrozenSet[Entry]
    h: FrozenSet[Lit]

    def __str__(self) -> str:
        ps = "{" + ", ".join(str(e) for e in sorted(self.p, key=_entry_key)) + "}"
        qs = "{" + ", ".join(str(e) for e in sorted(self.q, key=_entry_key)) + "}"
        hs = "{" + ", ".join(str(x) for x in sorted(self.h)) + "}"
        return f"({self.t}, {ps}, {qs}, {hs})"


_Key = Tuple[TwoType, FrozenSet[Entry], FrozenSet[Entry]]
_K = Dict[_Key, Set[Lit]]


def _expr(u: OneHalfType) -> BasicConceptExpr:
    return BasicConceptExpr(u.roles, u.concepts)


def _concept_part(entries: Iterable[Entry]) -> FrozenSet[BasicConceptExpr]:
    return frozenset(e for e in entries if isinstance(e, BasicConceptExpr))


class _Ctx:
    """Per-TBox caches used by the saturation rules."""

    def __init__(self, st: SaturatedTBox):
        self.st = st
        self._cands: Dict[TwoType, Tuple[OneHalfType, ...]] = {}
        self._ie: Dict[FrozenSet[str], FrozenSet[BasicConceptExpr]] = {}
        self._pinned: Dict[TwoType, FrozenSet[BasicConceptExpr]] = {}

    def candidates(self, t: TwoType) -> Tuple[OneHalfType, ...]:
        if t not in self._cands:
            self._cands[t] = succ_config(self.st, [t])
        return self._cands[t]

    def cand_exprs(self, t: TwoType) -> FrozenSet[BasicConceptExpr]:
        return frozenset(_expr(u) for u in self.candidates(t))

    def ie_exprs(self, concepts: FrozenSet[str]) -> FrozenSet[BasicConceptExpr]:
        if concepts not in self._ie:
            self._ie[concepts] = frozenset(
                _expr(u) for u in self.st.implied_existentials(concepts)
            )
        return self._ie[concepts]

    def pinned(self, t: TwoType) -> FrozenSet[BasicConceptExpr]:
        # witness expressions already covered by the one listed neighbor
        if t not in self._pinned:
            self._pinned[t] = self.ie_exprs(t.concepts) - self.cand_exprs(t)
        return self._pinned[t]


def _closed_subsets(st: SaturatedTBox, names: Sequence[str]) -> Set[FrozenSet[str]]:
    out: Set[FrozenSet[str]] = set()
    for n in range(len(names) + 1):
        for combo in itertools.combinations(names, n):
            closed = st.cl(frozenset(combo))
            if BOT not in closed:
                out.add(closed)
    return out


def _type_universe(
    st: SaturatedTBox, nc: FrozenSet[str], eager: bool = False
) -> Tuple[TwoType, ...]:
    """All 2-types a quadruple can mention: data-level bare types plus the
    types of anonymous tree nodes reachable from them."""
    names = sorted(nc)
    bare_sets = _closed_subsets(st, names)
    types: Set[TwoType] = {TwoType(s, frozenset(), frozenset()) for s in bare_sets}
    if eager:
        all_roles = sorted(st.tbox.all_roles())
        rolesets: Set[FrozenSet[Role]] = {frozenset()}
        for n in range(1, len(all_roles) + 1):
            for combo in itertools.combinations(all_roles, n):
                rolesets.add(st.close_roles(combo))
        for p1 in bare_sets:
            for rs in rolesets:
                for p3 in bare_sets:
                    t = TwoType(p1, rs, p3)
                    if st.is_locally_consistent(t):
                        types.add(t)
    else:
        work = list(bare_sets)
        seen: Set[FrozenSet[str]] = set()
        while work:
            p1 = work.pop()
            if p1 in seen:
                continue
            seen.add(p1)
            for u in st.implied_existentials(p1):
                child = TwoType(
                    u.concepts, frozenset(r.invert() for r in u.roles), p1
                )
                if st.is_locally_consistent(child):
                    types.add(child)
                work.append(u.concepts)
    return tuple(sorted(types, key=type_key))


def _seed_dict(ctx: _Ctx, universe: Sequence[TwoType]) -> _K:
    """Fresh quadruples: every way of splitting a type's witness
    expressions into present (P) and absent (Q)."""
    K: _K = {}
    for t in universe:
        cand = sorted(ctx.cand_exprs(t), key=_entry_key)
        ie = ctx.ie_exprs(t.concepts)
        for n in range(len(cand) + 1):
            for combo in itertools.combinations(cand, n):
                q = frozenset(combo)
                p: FrozenSet[Entry] = frozenset(ie - q)
                K.setdefault((t, p, q), set())
    return K


def _key_sort(item: Tuple[_Key, Set[Lit]]) -> Tuple:
    (t, p, q), _ = item
    return (
        type_key(t),
        tuple(sorted(str(e) for e in p)),
        tuple(sorted(str(e) for e in q)),
    )


def _classify(cons: Sequence[Constraint]):
    by_concept, by_ind, by_ref, by_and, by_neg, by_exists = [], [], [], [], [], []
    for c in cons:
        b = c.body
        if isinstance(b, ConceptRef):
            by_concept.append((c.head, b.name))
        elif isinstance(b, IndividualRef):
            by_ind.append((c.head, IndRef(b.name)))
        elif isinstance(b, ShapeRef):
            by_ref.append((c.head, b.name))
        elif isinstance(b, And) and isinstance(b.left, ShapeRef) and isinstance(b.right, ShapeRef):
            by_and.append((c.head, b.left.name, b.right.name))
        elif isinstance(b, NegShapeRef):
            by_neg.append((c.head, b.name))
        elif isinstance(b, ExistsRoles) and isinstance(b.body, ShapeRef):
            by_exists.append((c.head, frozenset(b.roles), Lit(b.body.name)))
        elif isinstance(b, ExistsRoles) and isinstance(b.body, NegShapeRef):
            by_exists.append((c.head, frozenset(b.roles), Lit(b.body.name, neg=True)))
        else:
            raise ValueError(f"constraint not in normal form: {c}")
    return by_concept, by_ind, by_ref, by_and, by_neg, by_exists


def _close(st: SaturatedTBox, cons: Sequence[Constraint], K: _K, ctx: _Ctx) -> None:
    by_concept, by_ind, by_ref, by_and, by_neg, by_exists = _classify(cons)
    while True:
        changed = False
        items = sorted(K.items(), key=_key_sort)

        for (t, p, q), h in items:
            bare = not t.roles and not t.others
            # concept-name bodies fire on the type's own concepts
            for head, a in by_concept:
                if (a == TOP or a in t.concepts) and Lit(head) not in h:
                    h.add(Lit(head))
                    changed = True
            # individual-constant bodies, unless the constant is known absent
            for head, ref in by_ind:
                if ref in q:
                    continue
                key2 = (t, p | {ref}, q)
                lit = Lit(head)
                tgt = K.setdefault(key2, set())
                need = (h | {lit}) - tgt
                if need:
                    tgt.update(h | {lit})
                    changed = True
            # existential bodies need the role available at this type
            for head, roles, inner in by_exists:
                e = BasicShapeExpr(roles, inner.name, inner.neg)
                if e in q:
                    continue
                ok = roles <= t.roles or bare
                if not ok:
                    ok = any(
                        roles <= b.roles
                        for b in p
                        if isinstance(b, BasicConceptExpr)
                    )
                if not ok:
                    continue
                key2 = (t, p | {e}, q)
                lit = Lit(head)
                tgt = K.setdefault(key2, set())
                need = (h | {lit}) - tgt
                if need:
                    tgt.update(h | {lit})
                    changed = True
            # plain implications over derived literals
            for head, inner in by_ref:
                if Lit(inner) in h and Lit(head) not in h:
                    h.add(Lit(head))
                    changed = True
            for head, left, right in by_and:
                if Lit(left) in h and Lit(right) in h and Lit(head) not in h:
                    h.add(Lit(head))
                    changed = True
            for head, inner in by_neg:
                if Lit(inner, neg=True) in h and Lit(head) not in h:
                    h.add(Lit(head))
                    changed = True

        # propagate through an anonymous child: the child quadruple models a
        # border node whose only listed neighbor is the parent. The child's
        # own witness claims that could only be satisfied or refuted by the
        # parent are discharged against the parent's H.
        if by_exists:
            items = sorted(K.items(), key=_key_sort)
            children = []
            for (tc, pc, qc), hc in items:
                if any(isinstance(e, IndRef) for e in pc):
                    continue
                if _concept_part(pc) != ctx.pinned(tc):
                    continue
                edge = frozenset(r.invert() for r in tc.roles)
                discharge_a = frozenset(
                    Lit(e.shape, e.neg) for e in pc if isinstance(e, BasicShapeExpr)
                )
                discharge_b = frozenset(
                    Lit(e.shape, not e.neg)
                    for e in qc
                    if isinstance(e, BasicShapeExpr) and e.roles <= tc.roles
                )
                children.append((tc, edge, hc, discharge_a | discharge_b))
            for (t, p, q), h in items:
                for head, roles, inner in by_exists:
                    if Lit(head) in h:
                        continue
                    for tc, edge, hc, discharge in children:
                        if inner not in hc:
                            continue
                        if tc.others != t.concepts or not roles <= edge:
                            continue
                        if BasicConceptExpr(edge, tc.concepts) not in q:
                            continue
                        if not discharge <= h:
                            continue
                        h.add(Lit(head))
                        changed = True
                        break

        # combine quadruples that agree on which witnesses are absent
        buckets: Dict[Tuple[TwoType, FrozenSet[BasicConceptExpr]], List[_Key]] = {}
        for key, _ in sorted(K.items(), key=_key_sort):
            t, p, q = key
            buckets.setdefault((t, _concept_part(q)), []).append(key)
        for _, keys in sorted(buckets.items(), key=lambda kv: type_key(kv[0][0])):
            if len(keys) < 2:
                continue
            for k1, k2 in itertools.combinations(keys, 2):
                merged = (k1[0], k1[1] | k2[1], k1[2] | k2[2])
                lits = K[k1] | K[k2]
                tgt = K.setdefault(merged, set())
                if not lits <= tgt:
                    tgt.update(lits)
                    changed = True

        if not changed:
            return


def _to_quadruples(K: _K) -> FrozenSet[Quadruple]:
    return frozenset(
        Quadruple(t, p, q, frozenset(h)) for (t, p, q), h in K.items()
    )


def _from_quadruples(quads: Iterable[Quadruple]) -> _K:
    K: _K = {}
    for qd in quads:
        K.setdefault((qd.t, qd.p, qd.q), set()).update(qd.h)
    return K


def _occurring_names(cons: Sequence[Constraint]) -> FrozenSet[str]:
    from .shapes import shape_occurrences

    names: Set[str] = set()
    for c in cons:
        names.add(c.head)
        for n, _ in shape_occurrences(c.body):
            names.add(n)
    return frozenset(names)


def _completion_dict(
    K: _K, cons: Sequence[Constraint], extra_settled: FrozenSet[str] = frozenset()
) -> _K:
    settled = sorted(_occurring_names(cons) | extra_settled)
    _, by_ind, _, _, _, by_exists = _classify(cons)
    out: _K = {}
    for (t, p, q), h in K.items():
        q_new = set(q)
        for head, roles, inner in by_exists:
            if Lit(head) not in h:
                q_new.add(BasicShapeExpr(roles, inner.name, inner.neg))
        for head, ref in by_ind:
            if Lit(head) not in h:
                q_new.add(ref)
        h_new = set(h)
        for name in settled:
            if Lit(name) not in h:
                h_new.add(Lit(name, neg=True))
        out.setdefault((t, frozenset(p), frozenset(q_new)), set()).update(h_new)
    return out


def psat(
    st: SaturatedTBox, cons: Sequence[Constraint], *, eager: bool = False
) -> FrozenSet[Quadruple]:
    """Saturate the seed quadruples under a positive constraint set."""
    nc = _nc_universe(st, cons)
    ctx = _Ctx(st)
    K = _seed_dict(ctx, _type_universe(st, nc, eager))
    _close(st, cons, K, ctx)
    return _to_quadruples(K)


def completion(
    quads: Iterable[Quadruple],
    cons: Sequence[Constraint],
    extra_settled: FrozenSet[str] = frozenset(),
) -> FrozenSet[Quadruple]:
    """Between strata: settle unfired shapes as negative knowledge.

    Adds the failed existential and constant bodies to Q and the negations
    of settled-but-unfired shape names to H.
    """
    return _to_quadruples(_completion_dict(_from_quadruples(quads), cons, extra_settled))


def sat(
    st: SaturatedTBox, cons: Sequence[Constraint], quads: Iterable[Quadruple]
) -> FrozenSet[Quadruple]:
    """Close an already completed quadruple set under one stratum."""
    K = _from_quadruples(quads)
    _close(st, cons, K, _Ctx(st))
    return _to_quadruples(K)


def _nc_universe(st: SaturatedTBox, cons: Sequence[Constraint]) -> FrozenSet[str]:
    sg = ShapesGraph.of(cons, ())
    return frozenset(
        (st.tbox.concept_names() | sg.concept_names()) - {TOP, BOT}
    )


def _entry_body(e: Entry) -> ShapeBody:
    if isinstance(e, BasicConceptExpr):
        inner: ShapeBody
        if not e.concepts:
            inner = ConceptRef(TOP)
        else:
            inner = _and_chain([ConceptRef(c) for c in sorted(e.concepts)])
        return ExistsRoles(e.roles, inner)
    if isinstance(e, BasicShapeExpr):
        inner2: ShapeBody = NegShapeRef(e.shape) if e.neg else ShapeRef(e.shape)
        return ExistsRoles(e.roles, inner2)
    return IndividualRef(e.name)


def _and_chain(parts: Sequence[ShapeBody]) -> ShapeBody:
    if not parts:
        return ConceptRef(TOP)
    body = parts[0]
    for nxt in parts[1:]:
        body = And(body, nxt)
    return body


def _emit(K: _K, heads: FrozenSet[str], nc: FrozenSet[str]) -> List[Constraint]:
    per_head: Dict[str, Dict[FrozenSet[str], List[ShapeBody]]] = {}
    for (t, p, q), h in sorted(K.items(), key=_key_sort):
        if p & q:
            continue  # vacuous: some witness both required and forbidden
        names = sorted({lit.name for lit in h if not lit.neg and lit.name in heads})
        if not names:
            continue
        parts: List[ShapeBody] = [ConceptRef(a) for a in sorted(t.concepts)]
        parts += [Not(ConceptRef(a)) for a in sorted(nc - t.concepts)]
        parts += [_entry_body(e) for e in sorted(p, key=_entry_key)]
        parts += [Not(_entry_body(e)) for e in sorted(q, key=_entry_key)]
        tokens = frozenset(str(x) for x in parts)
        for name in names:
            per_head.setdefault(name, {}).setdefault(tokens, parts)
    out: List[Constraint] = []
    for head in sorted(per_head):
        cands = per_head[head]
        # a body whose conjuncts include all of another body's is subsumed
        for tok in sorted(cands, key=lambda t: (len(t), sorted(t))):
            if any(other < tok for other in cands):
                continue
            out.append(Constraint(head, _and_chain(cands[tok])))
    return out


def rewrite(
    st: SaturatedTBox,
    strat: Stratification,
    *,
    eager: bool = False,
    stats: Optional[Dict[str, int]] = None,
) -> Tuple[Constraint, ...]:
    """Compile TBox consequences into the constraints themselves.

    The result is validated over the completed data graph with no further
    reasoning. Emission happens per stratum so the result stays stratified.
    """
    all_cons = tuple(c for group in strat.strata for c in group)
    nc = _nc_universe(st, all_cons)
    ctx = _Ctx(st)
    K = _seed_dict(ctx, _type_universe(st, nc, eager))

    occurring = _occurring_names(all_cons)
    emitted: List[Constraint] = []
    for i, group in enumerate(strat.strata):
        scope = tuple(c for g in strat.strata[:i] for c in g)
        later_heads = {c.head for g in strat.strata[i:] for c in g}
        settled = frozenset(n for n in occurring if n not in later_heads)
        K = _completion_dict(K, scope, settled)
        _close(st, group, K, ctx)
        heads = frozenset(c.head for c in group)
        emitted.extend(_emit(K, heads, nc))

    if stats is not None:
        stats["quadruples"] = len(K)

    seen: Set[Constraint] = set()
    out: List[Constraint] = []
    for c in list(all_cons) + emitted:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return tuple(out)


# ---------------------------------------------------------------------------
# pure rewriting: fold the ABox completion into the constraints


def _concept_shape(a: str) -> str:
    return f"_c_{a}"


def _role_shape(r: Role) -> str:
    return f"_b_{r}"


def _entailed_conj(st: SaturatedTBox) -> List[Tuple[FrozenSet[str], str]]:
    out = []
    for prem, head in sorted(st.conj, key=lambda x: (sorted(x[0]), x[1])):
        if head == BOT or BOT in prem:
            continue
        if prem == frozenset({head}):
            continue
        out.append((prem, head))
    return out


def _all_concepts(st: SaturatedTBox, c_t: Sequence[Constraint]) -> List[str]:
    return sorted(_nc_universe(st, c_t))


def _simplify_roles(st: SaturatedTBox, roles: FrozenSet[Role]) -> FrozenSet[Role]:
    # drop roles implied by a strictly smaller one in the same conjunction
    cur = set(roles)
    changed = True
    while changed:
        changed = False
        for r in sorted(cur):
            if any(s != r and r in st.superroles(s) for s in cur):
                cur.discard(r)
                changed = True
                break
    return frozenset(cur)


def _subst_alchi(st: SaturatedTBox, body: ShapeBody) -> ShapeBody:
    if isinstance(body, ConceptRef):
        if body.name in (TOP, BOT):
            return body
        return ShapeRef(_concept_shape(body.name))
    if isinstance(body, (IndividualRef, ShapeRef, NegShapeRef)):
        return body
    if isinstance(body, And):
        return And(_subst_alchi(st, body.left), _subst_alchi(st, body.right))
    if isinstance(body, Not):
        return Not(_subst_alchi(st, body.body))
    if isinstance(body, ExistsRoles):
        return ExistsRoles(
            _simplify_roles(st, body.roles), _subst_alchi(st, body.body)
        )
    from .shapes import Or

    if isinstance(body, Or):
        return Or(_subst_alchi(st, body.left), _subst_alchi(st, body.right))
    raise ValueError(f"cannot substitute inside {body!r}")


def pure_rewrite_alchi(
    st: SaturatedTBox, c_t: Sequence[Constraint]
) -> Tuple[Constraint, ...]:
    """Validation over the raw data graph, for TBoxes without counting.

    Concept names become shapes that mimic the completed graph; role
    conjunctions drop roles that are implied by a contained subrole.
    """
    if st.tbox.atmost:
        raise UnsupportedPattern(
            "counting axioms need edge rewriting; use the binary-shape variant"
        )
    ts: List[Constraint] = []
    for prem, head in _entailed_conj(st):
        body = _and_chain([ShapeRef(_concept_shape(a)) for a in sorted(prem)])
        ts.append(Constraint(_concept_shape(head), body))
    all_roles = sorted(st.tbox.all_roles())
    for ax in st.tbox.value:
        subs = [s for s in all_roles if ax.role in st.superroles(s)]
        for s in subs:
            inner: ShapeBody
            if ax.lhs == TOP:
                inner = ConceptRef(TOP)
            else:
                inner = ShapeRef(_concept_shape(ax.lhs))
            ts.append(
                Constraint(
                    _concept_shape(ax.filler),
                    ExistsRoles(frozenset({s.invert()}), inner),
                )
            )
    for a in _all_concepts(st, c_t):
        ts.append(Constraint(_concept_shape(a), ConceptRef(a)))

    replaced = [Constraint(c.head, _subst_alchi(st, c.body)) for c in c_t]
    out: List[Constraint] = []
    seen: Set[Constraint] = set()
    for c in replaced + ts:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return tuple(out)


def _roles_in(body: ShapeBody) -> Set[Role]:
    if isinstance(body, ExistsRoles):
        inner = _roles_in(body.body)
        return set(body.roles) | inner
    if isinstance(body, (And,)):
        return _roles_in(body.left) | _roles_in(body.right)
    if isinstance(body, Not):
        return _roles_in(body.body)
    from .shapes import Or

    if isinstance(body, Or):
        return _roles_in(body.left) | _roles_in(body.right)
    return set()


def _subst_b(body: ShapeBody) -> ShapeBody:
    if isinstance(body, ConceptRef):
        if body.name in (TOP, BOT):
            return body
        return ShapeRef(_concept_shape(body.name))
    if isinstance(body, (IndividualRef, ShapeRef, NegShapeRef)):
        return body
    if isinstance(body, And):
        return And(_subst_b(body.left), _subst_b(body.right))
    if isinstance(body, Not):
        return Not(_subst_b(body.body))
    if isinstance(body, ExistsRoles):
        refs = [BinRef(_role_shape(r)) for r in sorted(body.roles)]
        path = refs[0]
        for nxt in refs[1:]:
            path = PInter(path, nxt)
        return ExistsVia(path, _subst_b(body.body))
    from .shapes import Or

    if isinstance(body, Or):
        return Or(_subst_b(body.left), _subst_b(body.right))
    raise ValueError(f"cannot substitute inside {body!r}")


def pure_rewrite_shaclb(
    st: SaturatedTBox, c_t: Sequence[Constraint]
) -> Tuple[Union[Constraint, BinConstraint], ...]:
    """Validation over the raw data graph for the full axiom language.

    Edge shapes carry derived role atoms, so the counting-axiom merges of
    the completion can be reproduced pair by pair.
    """
    ts: List[Union[Constraint, BinConstraint]] = []
    for prem, head in _entailed_conj(st):
        body = _and_chain([ShapeRef(_concept_shape(a)) for a in sorted(prem)])
        ts.append(Constraint(_concept_shape(head), body))
    for ax in st.tbox.value:
        inner: ShapeBody
        if ax.lhs == TOP:
            inner = ConceptRef(TOP)
        else:
            inner = ShapeRef(_concept_shape(ax.lhs))
        ts.append(
            Constraint(
                _concept_shape(ax.filler),
                ExistsVia(BinRef(_role_shape(ax.role.invert())), inner),
            )
        )
    # counting: an implied witness merges onto an existing one, so the
    # edge shape gains the implied roles and the witness gains the fillers
    hat_n = 0
    for e in sorted(st.existentials, key=_key_exist):
        for ax in st.tbox.atmost:
            if ax.role not in e.roles:
                continue
            if ax.filler != TOP and ax.filler not in e.fillers:
                continue
            guard_parts: List[ShapeBody] = []
            if ax.lhs != TOP:
                guard_parts.append(ShapeRef(_concept_shape(ax.lhs)))
            guard_parts += [ShapeRef(_concept_shape(a)) for a in sorted(e.premise)]
            hat = f"_hat{hat_n}"
            hat_n += 1
            ts.append(Constraint(hat, _and_chain(guard_parts)))
            to_witness = PConcat(Test(hat), BinRef(_role_shape(ax.role)))
            if ax.filler != TOP:
                to_witness = PConcat(to_witness, Test(_concept_shape(ax.filler)))
            for ri in sorted(e.roles):
                ts.append(BinConstraint(_role_shape(ri), to_witness))
            wit: ShapeBody
            if ax.filler == TOP:
                wit = ConceptRef(TOP)
            else:
                wit = ShapeRef(_concept_shape(ax.filler))
            for bj in sorted(e.fillers):
                ts.append(
                    Constraint(
                        _concept_shape(bj),
                        And(
                            wit,
                            ExistsVia(
                                PInverse(BinRef(_role_shape(ax.role))), ShapeRef(hat)
                            ),
                        ),
                    )
                )
    for ri in st.tbox.roles:
        ts.append(BinConstraint(_role_shape(ri.sup), BinRef(_role_shape(ri.sub))))
    base_roles = set(st.tbox.all_roles())
    for c in c_t:
        base_roles.update(_roles_in(c.body))
    for r in sorted(base_roles):
        ts.append(BinConstraint(_role_shape(r), RoleStep(r)))
    for name in sorted({r.name for r in base_roles}):
        fwd, bwd = Role(name), Role(name, inverted=True)
        ts.append(BinConstraint(_role_shape(bwd), PInverse(BinRef(_role_shape(fwd)))))
        ts.append(BinConstraint(_role_shape(fwd), PInverse(BinRef(_role_shape(bwd)))))
    for a in _all_concepts(st, c_t):
        ts.append(Constraint(_concept_shape(a), ConceptRef(a)))

    replaced: List[Union[Constraint, BinConstraint]] = [
        Constraint(c.head, _subst_b(c.body)) for c in c_t
    ]
    out: List[Union[Constraint, BinConstraint]] = []
    seen: Set[Union[Constraint, BinConstraint]] = set()
    for c in replaced + ts:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return tuple(out)
