"""Successor configurations, ABox completion, and the direct model builder.

Two golden fixtures carry most of the weight: the mixed-family
seven-axiom TBox (merged successor requirements, completion) and the
two-individual pet KB (a model that needs no anonymous nodes at all).
Randomized completion is cross-checked against the ground chase oracle.
"""
from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import check_ground_model, find_ground_model, oracle_complete
from ontoshacl import model
from ontoshacl.core import (
    TOP,
    ABox,
    Anon,
    AtMostOne,
    ConjInclusion,
    ExistsInclusion,
    Individual,
    OneHalfType,
    Role,
    RoleInclusion,
    TBox,
    TwoType,
    ValueRestriction,
)
from ontoshacl.harness import gen_abox, gen_tbox
from ontoshacl.model import (
    InconsistentKB,
    build_can,
    children,
    complete_abox,
    completion_failure,
    is_model,
    root_frontier,
    succ_config,
)
from ontoshacl.tbox import saturate

# =============================================================================
# FIXTURES
# =============================================================================

GOLDEN_SEVEN = TBox.of(
    [
        ExistsInclusion("B0", Role("r0"), "A0"),
        ExistsInclusion("B0", Role("r1"), "A1"),
        AtMostOne("B1", Role("r1"), "A1"),
        ConjInclusion(frozenset({"A0"}), "A1"),
        RoleInclusion(Role("r0"), Role("r1")),
        ExistsInclusion("B1", Role("r2"), TOP),
        ValueRestriction("B0", Role("r2"), "A2"),
    ]
)

PET_TBOX = TBox.of(
    [
        ExistsInclusion("PetOwner", Role("hasPet"), TOP),
        RoleInclusion(Role("hasWingedPet"), Role("hasPet")),
        ExistsInclusion("PetOwner", Role("hasWingedPet"), TOP),
    ]
)

PET_ABOX = ABox.of(
    concepts=[("PetOwner", "linda"), ("Bird", "blu")],
    roles=[(Role("hasWingedPet"), "linda", "blu")],
)

seeds = st.integers(min_value=0, max_value=10**6)


def two_type(concepts, roles, others):
    return TwoType(frozenset(concepts), frozenset(Role(r) for r in roles), frozenset(others))


def half(roles, concepts):
    return OneHalfType(frozenset(Role(r) for r in roles), frozenset(concepts))


# =============================================================================
# SUCCESSOR CONFIGURATION GOLDENS
# =============================================================================


def test_succ_config_merges_under_counting():
    """A frontier that does not yet witness either requirement owes both."""
    s = saturate(GOLDEN_SEVEN)
    frontier = [
        two_type({"B0", "B1"}, {"r1"}, {"A2"}),
        two_type({"B0", "B1"}, {"r1"}, {"A2"}),  # duplicate on purpose
    ]
    assert set(succ_config(s, frontier)) == {
        half({"r0", "r1"}, {"A0", "A1"}),
        half({"r2"}, {"A2"}),
    }


def test_succ_config_drops_requirements_already_witnessed():
    s = saturate(GOLDEN_SEVEN)
    frontier = [two_type({"B0", "B1"}, {"r1", "r2"}, {"A2"})]
    assert set(succ_config(s, frontier)) == {half({"r0", "r1"}, {"A0", "A1"})}


def test_succ_config_rejects_bad_frontiers():
    s = saturate(GOLDEN_SEVEN)
    with pytest.raises(ValueError):
        succ_config(s, [])
    with pytest.raises(ValueError):
        succ_config(
            s,
            [two_type({"B0"}, {"r1"}, set()), two_type({"B1"}, {"r1"}, set())],
        )


def test_succ_filter_mutation_hook_changes_the_golden():
    # the selftest harness relies on this switch producing a real bug
    s = saturate(GOLDEN_SEVEN)
    frontier = [two_type({"B0", "B1"}, {"r1", "r2"}, {"A2"})]
    model.INJECT_SUCC_FILTER_BUG = True
    try:
        buggy = set(succ_config(s, frontier))
    finally:
        model.INJECT_SUCC_FILTER_BUG = False
    assert half({"r2"}, {"A2"}) in buggy  # the filter would have removed it


def test_children_follow_the_inverted_letter():
    s = saturate(GOLDEN_SEVEN)
    letter = two_type({"B0"}, {"r2"}, {"A2"})  # parent is B0, child is A2
    assert children(s, letter) == ()  # A2 owes nothing


# =============================================================================
# COMPLETION
# =============================================================================


def test_completion_golden():
    ab = ABox.of(
        concepts=[("B0", "a"), ("A0", "b")],
        roles=[(Role("r0"), "a", "b"), (Role("r2"), "a", "b")],
    )
    done = complete_abox(GOLDEN_SEVEN, ab)
    assert done.concept_atoms == ab.concept_atoms | {("A1", "b"), ("A2", "b")}
    assert done.role_atoms == ab.role_atoms | {("r1", "a", "b")}


def test_completion_is_idempotent_on_the_golden():
    ab = ABox.of(
        concepts=[("B0", "a"), ("A0", "b")],
        roles=[(Role("r0"), "a", "b"), (Role("r2"), "a", "b")],
    )
    done = complete_abox(GOLDEN_SEVEN, ab)
    assert complete_abox(GOLDEN_SEVEN, done) == done


def test_completion_raises_on_clash():
    tb = TBox.of([ConjInclusion(frozenset({"A", "B"}), "bot")])
    ab = ABox.of(concepts=[("A", "a"), ("B", "a")])
    with pytest.raises(InconsistentKB):
        complete_abox(tb, ab)
    assert completion_failure(tb, ab) is not None
    assert completion_failure(GOLDEN_SEVEN, ABox.of(concepts=[("B0", "a")])) is None


def test_completion_merges_are_impossible_between_names():
    # two distinct named witnesses under a counted role cannot merge
    tb = TBox.of([AtMostOne("A", Role("r"), TOP)])
    ab = ABox.of(
        concepts=[("A", "a")], roles=[(Role("r"), "a", "b"), (Role("r"), "a", "c")]
    )
    with pytest.raises(InconsistentKB):
        complete_abox(tb, ab)


# =============================================================================
# DIRECT MODEL CONSTRUCTION
# =============================================================================


def test_pet_model_needs_no_anonymous_nodes():
    got = build_can(PET_TBOX, PET_ABOX, depth=5)
    assert got.complete
    assert got.nodes == frozenset({Individual("linda"), Individual("blu")})
    assert ("hasPet", Individual("linda"), Individual("blu")) in got.edges
    assert got.concepts == frozenset(
        {("PetOwner", Individual("linda")), ("Bird", Individual("blu"))}
    )


def test_pet_model_at_depth_zero_is_already_closed():
    got = build_can(PET_TBOX, PET_ABOX, depth=0)
    assert got.complete
    assert len(got.nodes) == 2


def test_infinite_chain_truncates_to_the_requested_depth():
    tb = TBox.of([ExistsInclusion("A", Role("r"), "A")])
    ab = ABox.of(concepts=[("A", "a")])
    for n in range(6):
        got = build_can(tb, ab, depth=n)
        assert not got.complete  # there is always one more step owed
        named = [x for x in got.nodes if isinstance(x, Individual)]
        anon = sorted(
            (x for x in got.nodes if isinstance(x, Anon)), key=lambda w: w.depth
        )
        assert named == [Individual("a")]
        assert [w.depth for w in anon] == list(range(1, n + 1))
        assert len(got.edges) == n  # a simple chain, one edge per letter
        for w in anon:
            assert got.has_concept("A", w)


def test_root_frontier_lists_the_bare_type_and_every_neighbour():
    done = complete_abox(PET_TBOX, PET_ABOX)
    got = root_frontier(saturate(PET_TBOX), done, "linda")
    assert len(got) == 2
    bare = [t for t in got if not t.roles]
    edged = [t for t in got if t.roles]
    assert bare[0].concepts == frozenset({"PetOwner"})
    assert edged[0].roles == frozenset({Role("hasPet"), Role("hasWingedPet")})
    assert edged[0].others == frozenset({"Bird"})


def test_is_model_accepts_the_golden_and_rejects_a_truncation():
    ab = ABox.of(concepts=[("B0", "a"), ("B1", "a")])
    assert is_model(GOLDEN_SEVEN, ab, build_can(GOLDEN_SEVEN, ab, depth=2))
    chain_tb = TBox.of([ExistsInclusion("A", Role("r"), "A")])
    chain_ab = ABox.of(concepts=[("A", "a")])
    assert not is_model(chain_tb, chain_ab, build_can(chain_tb, chain_ab, depth=3))


def test_is_model_rejects_missing_assertions():
    got = build_can(PET_TBOX, PET_ABOX, depth=1)
    smaller = got.restrict([Individual("linda")])
    assert not is_model(PET_TBOX, PET_ABOX, smaller)


# =============================================================================
# ORACLE AGREEMENT
# =============================================================================


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_completion_matches_ground_chase(seed):
    rng = random.Random(seed)
    tb = gen_tbox(rng)
    ab = gen_abox(rng)
    expected = oracle_complete(tb, ab)
    if expected is None:
        with pytest.raises(InconsistentKB):
            complete_abox(tb, ab)
        return
    done = complete_abox(tb, ab)
    assert (done.concept_atoms, done.role_atoms) == expected


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_ground_chase_outputs_really_are_models(seed):
    rng = random.Random(seed)
    tb = gen_tbox(rng)
    ab = gen_abox(rng)
    found = find_ground_model(tb, ab)
    if found is not None:
        concepts, edges = found
        assert check_ground_model(tb, concepts, edges)
