"""Constraint evaluation: body semantics, perfect assignments, validation.

The stratified fixpoint is compared against a naive oracle on positive
constraint sets, where both must compute the same least model. The
choice-of-stratification invariance is pinned with a three-layer case
evaluated under two different hand-built layerings.
"""
from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_assignment
from ontoshacl.core import ABox, Individual, Interpretation, Role
from ontoshacl.evaluate import (
    BinConstraint,
    BinRef,
    PConcat,
    RoleStep,
    Test as ShapeTest,
    TruncationRefused,
    eval_body,
    eval_path,
    perfect_assignment,
    perfect_assignment_b,
    validate,
)
from ontoshacl.harness import gen_abox
from ontoshacl.paths import parse_regex
from ontoshacl.shapes import (
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
    ShapeRef,
    ShapesGraph,
    Stratification,
    UnguardedComparison,
    compute_stratification,
)

# =============================================================================
# A SMALL SHARED STRUCTURE
#
#   a --r--> b --r--> c     A(a), B(b), B(c)
#   a --q--> c
# =============================================================================

A, B, C = Individual("a"), Individual("b"), Individual("c")

TRIANGLE = Interpretation.of(
    [A, B, C],
    concepts=[("A", A), ("B", B), ("B", C)],
    edges=[(Role("r"), A, B), (Role("r"), B, C), (Role("q"), A, C)],
)

seeds = st.integers(min_value=0, max_value=10**6)


def ev(body, assign=frozenset()):
    return eval_body(body, TRIANGLE, assign)


def exists(role, body):
    return ExistsRoles(frozenset({Role(role)}), body)


# =============================================================================
# BODY SEMANTICS
# =============================================================================


def test_individual_ref_picks_one_node():
    assert ev(IndividualRef("b")) == {B}
    assert ev(IndividualRef("zz")) == frozenset()


def test_concept_and_boolean_semantics():
    assert ev(ConceptRef("B")) == {B, C}
    assert ev(ConceptRef("top")) == {A, B, C}
    assert ev(Not(ConceptRef("B"))) == {A}
    assert ev(Or(ConceptRef("A"), ConceptRef("B"))) == {A, B, C}
    assert ev(And(ConceptRef("B"), IndividualRef("c"))) == {C}


def test_shape_refs_read_the_assignment():
    assign = frozenset({("s", B)})
    assert ev(ShapeRef("s"), assign) == {B}
    assert ev(NegShapeRef("s"), assign) == {A, C}


def test_exists_roles_requires_every_listed_role():
    both = ExistsRoles(frozenset({Role("r"), Role("q")}), ConceptRef("top"))
    assert ev(both) == frozenset()  # no pair is linked by r and q at once
    assert ev(exists("q", ConceptRef("B"))) == {A}
    assert ev(ExistsRoles(frozenset({Role("r", True)}), ConceptRef("A"))) == {B}


def test_exists_path_walks_the_regex():
    assert ev(ExistsPath(parse_regex("r/r"), ConceptRef("B"))) == {A}
    assert ev(ExistsPath(parse_regex("r*"), IndividualRef("c"))) == {A, B, C}
    assert ev(ExistsPath(parse_regex("^r"), ConceptRef("A"))) == {B}


def test_guarded_eq_compares_reachable_sets():
    # from a, the words over r/r and q land on the same set {c}
    eq = GuardedEq("a", parse_regex("r/r"), parse_regex("q"))
    assert ev(eq) == {A}
    ne = GuardedEq("a", parse_regex("r"), parse_regex("q"))
    assert ev(ne) == frozenset()
    # a guard naming an absent individual is simply empty
    assert ev(GuardedEq("zz", parse_regex("r"), parse_regex("r"))) == frozenset()


def test_guarded_disj_requires_disjoint_reach():
    assert ev(GuardedDisj("a", parse_regex("r"), parse_regex("q"))) == {A}
    assert ev(GuardedDisj("a", parse_regex("r/r"), parse_regex("q"))) == frozenset()


def test_unguarded_comparison_raises_at_eval_time():
    with pytest.raises(UnguardedComparison):
        ev(GuardedEq(None, parse_regex("r"), parse_regex("q")))


# =============================================================================
# PATH EXPRESSIONS OVER PAIRS
# =============================================================================


def test_role_step_and_concat():
    pairs = eval_path(RoleStep(Role("r")), TRIANGLE, frozenset(), frozenset())
    assert pairs == {(A, B), (B, C)}
    two = PConcat(RoleStep(Role("r")), RoleStep(Role("r")))
    assert eval_path(two, TRIANGLE, frozenset(), frozenset()) == {(A, C)}


def test_test_steps_filter_on_the_unary_assignment():
    assign = frozenset({("s", B)})
    p = PConcat(RoleStep(Role("r")), ShapeTest("s"))
    assert eval_path(p, TRIANGLE, assign, frozenset()) == {(A, B)}


def test_bin_refs_read_the_binary_assignment():
    bins = frozenset({("e", A, C)})
    assert eval_path(BinRef("e"), TRIANGLE, frozenset(), bins) == {(A, C)}


# =============================================================================
# PERFECT ASSIGNMENTS
# =============================================================================


def test_reachability_via_positive_recursion():
    cs = [
        Constraint("reach", IndividualRef("a")),
        Constraint("reach", ExistsRoles(frozenset({Role("r", True)}), ShapeRef("reach"))),
    ]
    pa = perfect_assignment(TRIANGLE, compute_stratification(cs))
    assert pa == {("reach", A), ("reach", B), ("reach", C)}


def test_negation_reads_the_finished_lower_stratum():
    cs = [
        Constraint("b", ConceptRef("B")),
        Constraint("nb", NegShapeRef("b")),
    ]
    pa = perfect_assignment(TRIANGLE, compute_stratification(cs))
    assert ("nb", A) in pa and ("nb", B) not in pa


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_positive_fixpoint_matches_naive_oracle(seed):
    rng = random.Random(seed)
    ab = gen_abox(rng)
    interp = Interpretation.from_abox(ab)
    names = ["s0", "s1", "s2"]
    cs = []
    for i, name in enumerate(names):
        for _ in range(rng.randint(1, 2)):
            choice = rng.random()
            if choice < 0.3:
                body = ConceptRef(rng.choice(["C0", "C1", "top"]))
            elif choice < 0.5 and ab.individuals():
                body = IndividualRef(rng.choice(ab.individuals()))
            elif choice < 0.75:
                body = exists(rng.choice(["p", "q", "r"]), ShapeRef(rng.choice(names)))
            else:
                body = And(
                    ShapeRef(rng.choice(names)), Or(ConceptRef("C0"), ShapeRef(name))
                )
            cs.append(Constraint(name, body))
    pa = perfect_assignment(interp, compute_stratification(cs))
    assert pa == naive_assignment(interp, cs)


def test_two_layerings_same_assignment():
    """Any valid layering of a three-level set gives the same fixpoint."""
    c_low = Constraint("base", ConceptRef("B"))
    c_mid = Constraint("mid", NegShapeRef("base"))
    c_top = Constraint("top_s", And(ShapeRef("mid"), ShapeRef("free")))
    c_free = Constraint("free", ConceptRef("top"))
    all_cs = [c_low, c_mid, c_top, c_free]

    fine = Stratification(
        strata=((c_low, c_free), (c_mid,), (c_top,)),
        index=(("base", 0), ("free", 0), ("mid", 1), ("top_s", 2)),
    )
    coarse = Stratification(
        strata=((c_low,), (c_mid, c_free), (c_top,)),
        index=(("base", 0), ("free", 1), ("mid", 1), ("top_s", 2)),
    )
    auto = compute_stratification(all_cs)
    got = {
        perfect_assignment(TRIANGLE, layering)
        for layering in (fine, coarse, auto)
    }
    assert len(got) == 1


# =============================================================================
# VALIDATION AND TRUNCATION
# =============================================================================


def test_validate_reports_per_target():
    sg = ShapesGraph.of(
        [Constraint("s", ConceptRef("A"))], targets=[("s", "a"), ("s", "b")]
    )
    res = validate(TRIANGLE, sg)
    assert not res.valid
    assert [(t.shape, t.node, t.valid) for t in res.targets] == [
        ("s", "a", True),
        ("s", "b", False),
    ]
    assert res.undefined_shapes == ()
    assert not res.lower_bound


def test_validate_flags_undefined_target_shapes():
    sg = ShapesGraph.of([Constraint("s", ConceptRef("A"))], targets=[("ghost", "a")])
    res = validate(TRIANGLE, sg)
    assert res.undefined_shapes == ("ghost",)
    assert not res.valid


def test_truncated_models_refuse_negation():
    cut = Interpretation(TRIANGLE.nodes, TRIANGLE.concepts, TRIANGLE.edges, False)
    neg = ShapesGraph.of(
        [Constraint("s", Not(ConceptRef("A")))], targets=[("s", "a")]
    )
    with pytest.raises(TruncationRefused):
        validate(cut, neg)
    # positive constraints still give a sound lower bound
    pos = ShapesGraph.of([Constraint("s", ConceptRef("A"))], targets=[("s", "a")])
    res = validate(cut, pos)
    assert res.valid and res.lower_bound


# =============================================================================
# JOINT UNARY/BINARY FIXPOINTS
# =============================================================================


def test_binary_shapes_extend_the_edge_relation():
    items = [
        BinConstraint("link", RoleStep(Role("r"))),
        BinConstraint("link", RoleStep(Role("q"))),
        Constraint("hub", ExistsPath(parse_regex("r"), ConceptRef("top"))),
    ]
    asg = perfect_assignment_b(TRIANGLE, items)
    assert ("link", A, C) in asg.binary and ("link", A, B) in asg.binary
    assert ("hub", A) in asg.unary


def test_binary_constraints_can_read_unary_shapes():
    items = [
        Constraint("good", ConceptRef("B")),
        BinConstraint("e", PConcat(RoleStep(Role("r")), ShapeTest("good"))),
    ]
    asg = perfect_assignment_b(TRIANGLE, items)
    assert asg.binary == frozenset({("e", A, B), ("e", B, C)})


def test_unstratified_binary_sets_are_rejected():
    items = [Constraint("s", Not(ExistsPath(parse_regex("r"), ShapeRef("s"))))]
    with pytest.raises(ValueError, match="not stratified"):
        perfect_assignment_b(TRIANGLE, items)
