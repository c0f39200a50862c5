"""Randomized cross-checking of the validation pipelines.

Each case draws a small knowledge base and a stratified normal-form
constraint set, then demands that every route returns the same verdict
for every (shape, individual) target: direct evaluation over the full
anonymous tree, the constraint rewriting over the completed graph, and
the two pure rewritings over the raw graph.

Generated axioms only ever point to strictly lower concept indices
(conjunction heads, existential fillers, and value-restriction fillers
alike), so a node's maximal index drops along every parent-child step
and the anonymous part bottoms out within one letter per concept name.
That keeps the direct route total: it never has to truncate.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from . import model
from .chase import NotTerminated, SizeGuardExceeded, run_core_chase
from .core import (
    TOP,
    ABox,
    AtMostOne,
    ConjInclusion,
    ExistsInclusion,
    Individual,
    Interpretation,
    Role,
    RoleInclusion,
    TBox,
    ValueRestriction,
)
from .evaluate import perfect_assignment_b, validate
from .formats import (
    serialize_abox,
    serialize_constraints,
    serialize_targets,
    serialize_tbox,
)
from .model import InconsistentKB, build_can, complete_abox
from .rewrite import pure_rewrite_alchi, pure_rewrite_shaclb, rewrite
from .shapes import (
    And,
    ConceptRef,
    Constraint,
    ExistsRoles,
    IndividualRef,
    NegShapeRef,
    ShapeRef,
    ShapesGraph,
    compute_stratification,
)
from .tbox import SaturatedTBox

CONCEPTS = ("C0", "C1", "C2", "C3", "C4")
ROLES = ("p", "q", "r")
INDIVIDUALS = ("a", "b", "c", "d", "e", "f")

# depth that provably exhausts any generated tree: one letter per concept
SAFE_DEPTH = len(CONCEPTS) + 2


def _role(rng: random.Random, names: Sequence[str] = ROLES) -> Role:
    return Role(rng.choice(names), rng.random() < 0.25)


def gen_tbox(rng: random.Random, allow_atmost: bool = True) -> TBox:
    axioms: List = []
    kinds = ["conj", "conj", "exists", "exists", "forall", "role"]
    if allow_atmost:
        kinds.append("atmost")
    for _ in range(rng.randint(2, 6)):
        kind = rng.choice(kinds)
        if kind == "conj":
            rhs_i = rng.randint(0, len(CONCEPTS) - 2)
            pool = CONCEPTS[rhs_i + 1 :]
            lhs = rng.sample(pool, rng.randint(1, min(2, len(pool))))
            axioms.append(ConjInclusion(frozenset(lhs), CONCEPTS[rhs_i]))
        elif kind == "exists":
            lhs_i = rng.randint(1, len(CONCEPTS) - 1)
            filler = rng.choice(CONCEPTS[:lhs_i] + (TOP,))
            axioms.append(ExistsInclusion(CONCEPTS[lhs_i], _role(rng), filler))
        elif kind == "forall":
            lhs_i = rng.randint(1, len(CONCEPTS) - 1)
            filler = rng.choice(CONCEPTS[:lhs_i])
            axioms.append(ValueRestriction(CONCEPTS[lhs_i], _role(rng), filler))
        elif kind == "atmost":
            lhs = rng.choice(CONCEPTS)
            filler = rng.choice(CONCEPTS + (TOP,))
            axioms.append(AtMostOne(lhs, _role(rng), filler))
        else:
            i, j = sorted(rng.sample(range(len(ROLES)), 2))
            sub = Role(ROLES[i], rng.random() < 0.25)
            sup = Role(ROLES[j], rng.random() < 0.25)
            axioms.append(RoleInclusion(sub, sup))
    return TBox.of(axioms)


def gen_abox(rng: random.Random) -> ABox:
    inds = INDIVIDUALS[: rng.randint(1, len(INDIVIDUALS))]
    concepts = {
        (rng.choice(CONCEPTS), rng.choice(inds)) for _ in range(rng.randint(1, 5))
    }
    roles = {
        (Role(rng.choice(ROLES)), rng.choice(inds), rng.choice(inds))
        for _ in range(rng.randint(0, 5))
    }
    return ABox.of(concepts, roles)


def gen_constraints(
    rng: random.Random, abox: ABox, max_shapes: int = 6
) -> Tuple[Constraint, ...]:
    """Normal-form bodies only; negative references go to strictly lower
    strata so the result is stratified by construction."""
    names = [f"s{i}" for i in range(rng.randint(1, max_shapes))]
    stratum = {n: rng.randint(0, 1) for n in names}
    inds = abox.individuals() or ("a",)

    def body(head: str):
        low = [n for n in names if stratum[n] < stratum[head]]
        level = [n for n in names if stratum[n] <= stratum[head]]
        while True:
            pick = rng.randint(0, 5)
            if pick == 0:
                return ConceptRef(rng.choice(CONCEPTS + (TOP,)))
            if pick == 1:
                return IndividualRef(rng.choice(inds))
            if pick == 2:
                return ShapeRef(rng.choice(level))
            if pick == 3 and low:
                return NegShapeRef(rng.choice(low))
            if pick == 4:
                return And(ShapeRef(rng.choice(level)), ShapeRef(rng.choice(level)))
            if pick == 5:
                roles = frozenset(
                    _role(rng) for _ in range(rng.randint(1, 2))
                )
                if low and rng.random() < 0.4:
                    return ExistsRoles(roles, NegShapeRef(rng.choice(low)))
                return ExistsRoles(roles, ShapeRef(rng.choice(level)))

    cons: List[Constraint] = []
    for head in names:
        for _ in range(rng.randint(1, 2)):
            cons.append(Constraint(head, body(head)))
    return tuple(cons[:12])


def gen_case(
    rng: random.Random, allow_atmost: bool = True
) -> Tuple[TBox, ABox, ShapesGraph]:
    tbox = gen_tbox(rng, allow_atmost)
    abox = gen_abox(rng)
    cons = gen_constraints(rng, abox)
    shapes = sorted({c.head for c in cons})
    targets = [(s, i) for s in shapes for i in abox.individuals()]
    return tbox, abox, ShapesGraph.of(cons, targets)


# ---------------------------------------------------------------------------
# route comparison


Verdicts = Dict[Tuple[str, str], bool]


def _verdicts(results) -> Verdicts:
    return {(r.shape, r.node): r.valid for r in results.targets}


def compare_routes(
    tbox: TBox,
    abox: ABox,
    sg: ShapesGraph,
    include_chase: bool = False,
) -> Optional[str]:
    """None when every route agrees on every target, else a description.

    Raises InconsistentKB for inconsistent inputs; callers filter those.
    """
    sat = SaturatedTBox(tbox)
    completed = complete_abox(tbox, abox, sat)

    can = build_can(tbox, abox, depth=SAFE_DEPTH, sat=sat)
    if not can.complete:
        return f"canonical model still open at depth {SAFE_DEPTH}"
    if not model.is_model(tbox, abox, can):
        return "direct model fails an axiom or assertion"

    direct = _verdicts(validate(can, sg))

    strat = compute_stratification(sg.constraints)
    c_t = rewrite(sat, strat)
    over_completed = Interpretation.from_abox(completed, complete=True)
    rewritten = _verdicts(validate(over_completed, ShapesGraph.of(c_t, sg.targets)))
    if direct != rewritten:
        return _diff("direct", direct, "rewrite", rewritten)

    raw = Interpretation.from_abox(abox, complete=True)
    if not tbox.atmost:
        alchi = _verdicts(
            validate(raw, ShapesGraph.of(pure_rewrite_alchi(sat, c_t), sg.targets))
        )
        if direct != alchi:
            return _diff("direct", direct, "pure-alchi", alchi)

    items = pure_rewrite_shaclb(sat, c_t)
    asg = perfect_assignment_b(raw, items)
    shaclb = {
        (s, i): (s, Individual(i)) in asg.unary for s, i in sg.targets
    }
    if direct != shaclb:
        return _diff("direct", direct, "pure-shaclb", shaclb)

    if include_chase and len(abox.individuals()) <= 3 and len(can.nodes) <= 8:
        try:
            chased = run_core_chase(sat, abox, max_rounds=12)
        except (NotTerminated, SizeGuardExceeded):
            chased = None
        if chased is not None:
            cv = _verdicts(validate(chased, sg))
            if direct != cv:
                return _diff("direct", direct, "chase", cv)

    return None


def _diff(name_a: str, a: Verdicts, name_b: str, b: Verdicts) -> str:
    lines = [f"{name_a} vs {name_b} disagree:"]
    for key in sorted(set(a) | set(b)):
        va, vb = a.get(key), b.get(key)
        if va != vb:
            s, i = key
            lines.append(f"  ${s}(@{i}): {name_a}={va} {name_b}={vb}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# shrinking


def _still_fails(tbox: TBox, abox: ABox, sg: ShapesGraph) -> bool:
    try:
        return compare_routes(tbox, abox, sg) is not None
    except InconsistentKB:
        return False
    except Exception:
        # a crash is as good a repro as a disagreement
        return True


def shrink(
    tbox: TBox, abox: ABox, sg: ShapesGraph, budget: int = 400
) -> Tuple[TBox, ABox, ShapesGraph]:
    """Greedy one-at-a-time removal of axioms, atoms, constraints, targets."""

    def axioms(t: TBox) -> List:
        return list(t.conj) + list(t.atmost) + list(t.value) + list(t.exists) + list(t.roles)

    spent = 0
    changed = True
    while changed and spent < budget:
        changed = False
        for ax in axioms(tbox):
            cand = TBox.of([a for a in axioms(tbox) if a != ax])
            spent += 1
            if _still_fails(cand, abox, sg):
                tbox, changed = cand, True
        for atom in sorted(abox.concept_atoms):
            cand_a = ABox(abox.concept_atoms - {atom}, abox.role_atoms)
            spent += 1
            if _still_fails(tbox, cand_a, sg):
                abox, changed = cand_a, True
        for ratom in sorted(abox.role_atoms):
            cand_a = ABox(abox.concept_atoms, abox.role_atoms - {ratom})
            spent += 1
            if _still_fails(tbox, cand_a, sg):
                abox, changed = cand_a, True
        for c in sg.constraints:
            cand_s = ShapesGraph.of(
                [x for x in sg.constraints if x != c], sg.targets
            )
            spent += 1
            if _still_fails(tbox, abox, cand_s):
                sg, changed = cand_s, True
        for t in sg.targets:
            cand_s = ShapesGraph.of(sg.constraints, [x for x in sg.targets if x != t])
            spent += 1
            if _still_fails(tbox, abox, cand_s):
                sg, changed = cand_s, True
    return tbox, abox, sg


def render_bundle(tbox: TBox, abox: ABox, sg: ShapesGraph) -> str:
    return (
        "-- tbox --\n"
        + serialize_tbox(tbox)
        + "-- abox --\n"
        + serialize_abox(abox)
        + "-- shapes --\n"
        + serialize_constraints(sg.constraints)
        + "-- targets --\n"
        + serialize_targets(sg.targets)
    )


# ---------------------------------------------------------------------------
# driver


@dataclass
class SelftestReport:
    seed: int
    requested: int
    ran: int
    skipped: int
    failing_case: Optional[int] = None
    failure: Optional[str] = None
    bundle: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failure is None

    def render(self) -> str:
        lines = [
            f"selftest seed={self.seed} cases={self.requested}",
            f"ran={self.ran} skipped={self.skipped}",
        ]
        if self.passed:
            lines.append("result: PASS")
            return "\n".join(lines) + "\n"
        lines.append(f"result: FAIL at case {self.failing_case}")
        lines.append(self.failure or "")
        if self.bundle:
            lines.append("minimized repro:")
            lines.append(self.bundle.rstrip("\n"))
        return "\n".join(lines) + "\n"


def case_rng(seed: int, index: int) -> random.Random:
    return random.Random(seed * 1_000_003 + index)


def run_selftest(seed: int, cases: int, inject_bug: bool = False) -> SelftestReport:
    previous = model.INJECT_SUCC_FILTER_BUG
    model.INJECT_SUCC_FILTER_BUG = inject_bug
    ran = skipped = 0
    try:
        for i in range(cases):
            rng = case_rng(seed, i)
            tbox, abox, sg = gen_case(rng)
            try:
                failure = compare_routes(tbox, abox, sg, include_chase=(i % 10 == 0))
            except InconsistentKB:
                skipped += 1
                continue
            ran += 1
            if failure is not None:
                tbox, abox, sg = shrink(tbox, abox, sg)
                return SelftestReport(
                    seed,
                    cases,
                    ran,
                    skipped,
                    failing_case=i,
                    failure=failure,
                    bundle=render_bundle(tbox, abox, sg),
                )
    finally:
        model.INJECT_SUCC_FILTER_BUG = previous
    return SelftestReport(seed, cases, ran, skipped)
