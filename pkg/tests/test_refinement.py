from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentplan.dsl import Atom, Comparison, Literal, builtin_domain, is_var, parse_domain, parse_literal
from intentplan.grounding import ground
from intentplan.levels import generate_level, level_domain
from intentplan.planning import Goal, Plan, plan_minimal
from intentplan.refinement import (
    RefinementError,
    Transition,
    fine_goal,
    fine_state,
    lift_observations,
    refine,
    relevant_constants,
    restrict,
    spec_of,
    zoom,
)
from intentplan.semantics import complete_state, successor

from conftest import TWO_ROOM
from test_history import act

ATI_NAMES = {"activity", "activity_goal", "active", "in_progress", "next_name", "current_action_index",
             "intended", "start", "stop", "select", "abandon"}


@pytest.fixture(scope="module")
def ra_fine():
    coarse = builtin_domain("ra_fine")
    return coarse, refine(coarse), spec_of(coarse), ground(coarse)


def coarse_state(g, *facts: str) -> int:
    s = complete_state({g.atom_id(parse_literal(f).atom): True for f in facts}, g)
    assert isinstance(s, int)
    return s


def transition(g, s: int, action: str) -> Transition:
    a = act(action)
    after = successor(s, g.action_id(a), g)
    assert isinstance(after, int)
    return Transition(s, a, after)


def test_place_star_has_sixteen_cells(ra_fine) -> None:
    _, fine, spec, _ = ra_fine
    assert len(fine.signature.members("place*")) == 16
    assert fine.signature.actions["move*"] == ("robot", "place*")
    assert spec.components("library") == ("c13", "c14", "c15", "c16")


def test_refined_coarse_fluents_become_defined(ra_fine) -> None:
    _, fine, _, _ = ra_fine
    assert "loc" in fine.signature.defined_fluents
    assert "loc*" in fine.signature.basic_fluents
    assert "move" not in fine.signature.actions


def test_no_block_is_identity() -> None:
    coarse = parse_domain(TWO_ROOM)
    gc, gf = ground(coarse), ground(refine(coarse))
    assert gc.atoms == gf.atoms
    assert gc.actions == gf.actions


def test_tests_only_adds_machinery() -> None:
    coarse = parse_domain(TWO_ROOM + "refinement:\n  test loc(Th, P) by R if loc(R, P)\n")
    gc, gf = ground(coarse), ground(refine(coarse))
    assert set(gc.atoms) <= set(gf.atoms)
    assert {a.name for a in gf.atoms} - {a.name for a in gc.atoms} == {"observed_loc", "observed_not_loc", "can_test_loc"}
    assert {a.name for a in gf.actions} - {a.name for a in gc.actions} == {"test_loc"}


def test_l1_atom_count_by_hand() -> None:
    g = ground(refine(level_domain("L1")))
    things, places, cells, parts = 2, 2, 4, 1
    fine_consts, coarse_consts = cells + parts, places + things
    count = (
        coarse_consts * fine_consts  # component
        + cells * cells + places * places  # next_to*, next_to
        + things * places + 1  # loc, in_hand (now defined)
        + things * cells + parts  # loc*, in_hand*
        + 3 * things * cells  # observed_loc*, observed_not_loc*, can_test_loc*
        + 3 * parts  # the same for in_hand*
        + things * places + 1  # observed_loc, observed_in_hand
    )
    assert len(g.atoms) == count == 86


def test_l3_atom_count_by_enumeration() -> None:
    fine = refine(level_domain("L3"))
    sig = fine.signature
    expected = set()
    for table in (sig.statics, sig.basic_fluents, sig.defined_fluents):
        for name, sorts in table.items():
            for args in itertools.product(*(sig.members(s) for s in sorts)):
                expected.add(Atom(name, args))
    assert set(ground(fine).atoms) == expected


def test_undeclared_parent_rejected() -> None:
    text = TWO_ROOM + "refinement:\n  place* = {c1: r1, c2: r3}\n"
    with pytest.raises(Exception):
        spec_of(parse_domain(text))


def test_missing_components_rejected() -> None:
    with pytest.raises(RefinementError):
        spec_of(parse_domain(TWO_ROOM + "refinement:\n  place* = {c1: r1}\n"))


def test_bridge_closure() -> None:
    coarse = level_domain("L2")
    spec = spec_of(coarse)
    g = ground(refine(coarse))
    rng = random.Random(3)
    cells = spec.fine_members["place*"]
    for _ in range(50):
        placement = {th: rng.choice(cells) for th in ("rob1", "obj1", "obj2")}
        s = complete_state({g.atom_id(Atom("loc*", (th, c))): True for th, c in placement.items()}, g)
        for th, c in placement.items():
            for p in coarse.signature.members("place"):
                assert g.holds(s, Atom("loc", (th, p))) == (spec.component_map[c] == p)


def test_carried_part_moves_whole_object() -> None:
    g = ground(refine(level_domain("L2")))
    s = complete_state({g.atom_id(Atom("loc*", ("rob1", "c1"))): True, g.atom_id(Atom("loc*", ("obj1", "c1"))): True}, g)
    s = successor(s, g.action_id(Atom("pickup*", ("rob1", "obj1_p2"))), g)
    s = successor(s, g.action_id(Atom("move*", ("rob1", "c2"))), g)
    assert g.holds(s, Atom("loc*", ("obj1", "c2")))
    assert g.holds(s, Atom("in_hand", ("rob1", "obj1")))


def test_relcon_example(ra_fine) -> None:
    _, _, _, g = ra_fine
    s = coarse_state(g, "loc(rob1, kitchen)", "loc(book1, office1)", "loc(book2, office2)")
    t = transition(g, s, "move(rob1, office1)")
    goal = Goal.parse("loc(book1, library)")
    assert relevant_constants(t, goal, g) == {"rob1", "office1", "kitchen", "book1", "library"}
    assert relevant_constants(t, None, g) == {"rob1", "office1", "kitchen"}


def _relcon_oracle(t: Transition, goal: Goal | None, g) -> set[str]:
    """Apply each rule by brute-force substitution over every constant."""
    out = set(t.action.args)
    if goal is not None:
        out |= {c for l in goal.literals for c in l.atom.args}
    for i, atom in enumerate(g.atoms):
        if g.kind[i] != "static" and g.holds(t.before, atom) != g.holds(t.after, atom):
            out |= set(atom.args)
    sig = g.desc.signature
    consts = sorted(sig.constants())

    def subst(x, env):
        return env.get(x, x)

    for ax in g.desc.axioms:
        if ax.kind != "exec" or ax.action.name != t.action.name:
            continue
        names = sorted({a for it in [ax.action, *[b.atom if isinstance(b, Literal) else None for b in ax.body]] if it
                        for a in it.args if is_var(a)} | {x for b in ax.body if isinstance(b, Comparison)
                                                          for x in (b.left, b.right) if is_var(x)})
        for vals in itertools.product(consts, repeat=len(names)):
            env = dict(zip(names, vals))
            if Atom(ax.action.name, tuple(subst(a, env) for a in ax.action.args)) != t.action:
                continue
            ok, gained = True, set()
            for b in ax.body:
                if isinstance(b, Comparison):
                    ok &= (subst(b.left, env) == subst(b.right, env)) == (b.op == "=")
                    continue
                ground_atom = Atom(b.atom.name, tuple(subst(a, env) for a in b.atom.args))
                kind = sig.kind_of(b.atom.name)
                if kind == "sort":
                    ok &= ground_atom.args[0] in sig.members(b.atom.name)
                elif ground_atom not in g.atom_index:
                    ok = False
                elif kind == "static":
                    ok &= g.holds(t.before, ground_atom) == b.positive
                elif b.positive and g.holds(t.before, ground_atom):
                    gained |= set(ground_atom.args)
            if ok:
                out |= gained
    return out


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_relcon_matches_oracle(ra, data) -> None:
    places = ["office1", "office2", "kitchen", "library"]
    robot = data.draw(st.sampled_from(places))
    b1 = data.draw(st.sampled_from(places + ["hand"]))
    b2 = data.draw(st.sampled_from(places))
    facts = [f"loc(rob1, {robot})", f"loc(book2, {b2})"]
    facts.append("in_hand(rob1, book1)" if b1 == "hand" else f"loc(book1, {b1})")
    s = coarse_state(ra, *facts)
    options = [a for a in ra.actions if a.name in ("move", "pickup", "putdown", "unlock")
               and isinstance(successor(s, ra.action_id(a), ra), int)]
    a = data.draw(st.sampled_from(options))
    t = Transition(s, a, successor(s, ra.action_id(a), ra))
    goal = data.draw(st.sampled_from([None, Goal.parse("loc(book1, library)"), Goal.parse("in_hand(rob1, book2)")]))
    assert relevant_constants(t, goal, ra) == _relcon_oracle(t, goal, ra)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["move(rob1, office1)", "move(rob1, library)", "pickup(rob1, book2)"]),
       st.lists(st.sampled_from(["loc(book1, library)", "loc(book2, office2)", "-in_hand(rob1, book1)",
                                 "locked(library)"]), max_size=3),
       st.lists(st.sampled_from(["loc(book2, library)", "in_hand(rob1, book2)"]), max_size=2))
def test_relcon_monotone_in_goal(ra, action: str, g1: list[str], g2: list[str]) -> None:
    s = coarse_state(ra, "loc(rob1, kitchen)", "loc(book1, office1)", "loc(book2, kitchen)")
    t = transition(ra, s, action)
    small = Goal(tuple(parse_literal(x) for x in g1))
    big = Goal(tuple(parse_literal(x) for x in g1 + g2))
    assert relevant_constants(t, small, ra) <= relevant_constants(t, big, ra)


def test_zoom_move_example(ra_fine) -> None:
    coarse, fine, spec, g = ra_fine
    s = coarse_state(g, "loc(rob1, kitchen)", "loc(book1, office1)", "loc(book2, office2)")
    t = transition(g, s, "move(rob1, office1)")
    goal = Goal.parse("loc(book1, library)")
    z = zoom(fine, t, goal, relevant_constants(t, goal, g), g, spec)
    cells = set(spec.components("kitchen")) | set(spec.components("office1"))
    assert set(z.desc.signature.members("place*")) == cells
    assert {"move*"} <= set(z.desc.signature.actions)
    assert not {"pickup*", "putdown*"} & set(z.desc.signature.actions)
    assert not any(ax.action is not None and ax.action.name in ("pickup*", "putdown*") for ax in z.desc.axioms)
    moves = {a for a in z.grounded.actions if a.name == "move*"}
    assert moves == {Atom("move*", ("rob1", c)) for c in cells}


def test_zoom_pickup_keeps_parts(ra_fine) -> None:
    coarse, fine, spec, g = ra_fine
    s = coarse_state(g, "loc(rob1, kitchen)", "loc(book1, office1)", "loc(book2, kitchen)")
    t = transition(g, s, "pickup(rob1, book2)")
    z = zoom(fine, t, None, relevant_constants(t, None, g), g, spec)
    assert set(z.desc.signature.members("object*")) == {"book2_cover", "book2_pages"}
    assert set(z.desc.signature.members("place*")) == set(spec.components("kitchen"))


def test_restrict_to_everything_is_identity(ra_fine) -> None:
    _, fine, _, _ = ra_fine
    everything = fine.signature.constants()
    assert ground(restrict(fine, everything)).atoms == ground(fine).atoms
    assert len(restrict(fine, everything).axioms) == len(fine.axioms)


def test_no_ati_leakage(ra_fine) -> None:
    coarse, fine, spec, g = ra_fine
    s = coarse_state(g, "loc(rob1, kitchen)", "loc(book1, office1)", "loc(book2, office2)")
    t = transition(g, s, "move(rob1, office1)")
    z = zoom(fine, t, None, relevant_constants(t, None, g), g, spec)
    for desc in (fine, z.desc):
        sig = desc.signature
        names = set(sig.statics) | set(sig.basic_fluents) | set(sig.defined_fluents) | set(sig.actions)
        assert not names & ATI_NAMES


def test_fine_goal_is_existential(ra_fine) -> None:
    coarse, fine, spec, g = ra_fine
    s = coarse_state(g, "loc(rob1, kitchen)", "loc(book1, office1)", "loc(book2, office2)")
    t = transition(g, s, "move(rob1, office1)")
    z = zoom(fine, t, None, relevant_constants(t, None, g), g, spec)
    zg = z.grounded
    goal = fine_goal(zg, coarse.signature, t.after, g)
    assert parse_literal("loc(rob1, office1)") in goal.literals
    for c in spec.components("office1"):
        assert goal.holds(zg, fine_state(zg, [Atom("loc*", ("rob1", c))]))
    assert not goal.holds(zg, fine_state(zg, [Atom("loc*", ("rob1", "c9"))]))


def test_l3_zoomed_grounding_is_small() -> None:
    coarse = level_domain("L3")
    spec, fine, g = spec_of(coarse), refine(coarse), ground(coarse)
    task = generate_level("L3", 0)
    room = spec.component_map[task.cell_of("rob1")]
    s = coarse_state(g, *(f"loc({th}, {spec.component_map[c]})" for th, c in task.placement))
    nxt = next(p for p in coarse.signature.members("place") if g.holds(g.static_state, Atom("next_to", (room, p))))
    t = transition(g, s, f"move(rob1, {nxt})")
    goal = Goal((Literal(Atom("loc", (task.target, task.destination))),))
    z = zoom(fine, t, goal, relevant_constants(t, goal, g), g, spec)
    assert len(z.grounded.ground_axioms) < 0.1 * len(ground(fine).ground_axioms)


@pytest.mark.parametrize("level", ["L1", "L2", "L3"])
@pytest.mark.parametrize("seed", range(3))
def test_zoomed_paths_exist(level: str, seed: int) -> None:
    """Each coarse step of a plan has a zoomed fine plan whose outcome agrees with the coarse successor."""
    coarse = level_domain(level)
    spec, fine, g = spec_of(coarse), refine(coarse), ground(coarse)
    world = ground(fine)
    task = generate_level(level, seed)
    truth = complete_state({world.atom_id(Atom("loc*", p)): True for p in task.placement}, world)
    s = coarse_state(g, *(f"loc({th}, {spec.component_map[c]})" for th, c in task.placement))
    goal = Goal((Literal(Atom("loc", (task.target, task.destination))), Literal(Atom("in_hand", ("rob1", task.target)), False)))
    plan = plan_minimal(g, s, goal)
    assert isinstance(plan, Plan)
    for a in plan.actions:
        t = transition(g, s, str(a))
        z = zoom(fine, t, goal, relevant_constants(t, goal, g), g, spec)
        zg = z.grounded
        fgoal = fine_goal(zg, coarse.signature, t.after, g)
        init = fine_state(zg, [x for x in world.true_atoms(truth) if world.kind[world.atom_index[x]] == "basic"])
        fplan = plan_minimal(zg, init, fgoal, 40)
        assert isinstance(fplan, Plan), f"no fine plan for {a}"
        for fa in fplan.actions:
            truth = successor(truth, world.action_id(fa), world)
            assert isinstance(truth, int)
        for lit in fgoal.literals:
            assert world.holds(truth, lit.atom) == lit.positive
        s = t.after
    assert all(world.holds(truth, l.atom) == l.positive for l in goal.literals)


def test_lift_examples(ra_fine) -> None:
    coarse, _, spec, _ = ra_fine
    sig = coarse.signature
    obs = lift_observations([parse_literal("loc*(book1, c15)")], spec, sig)
    assert [(o.fluent, o.value) for o in obs] == [(parse_literal("loc(book1, library)").atom, True)]
    obs = lift_observations([parse_literal("in_hand*(rob1, book1_cover)")], spec, sig)
    assert [(o.fluent, o.value) for o in obs] == [(parse_literal("in_hand(rob1, book1)").atom, True)]
    assert lift_observations([], spec, sig) == []


def test_lift_merges_and_skips(ra_fine) -> None:
    coarse, _, spec, _ = ra_fine
    sig = coarse.signature
    lits = [parse_literal(x) for x in ("loc*(book1, c13)", "loc*(book1, c14)", "-loc*(book2, c13)", "-locked(library)")]
    obs = {(str(o.fluent), o.value) for o in lift_observations(lits, spec, sig)}
    # one empty cell says nothing about the room; unrefined fluents pass through
    assert obs == {("loc(book1, library)", True), ("locked(library)", False)}


def test_lift_rejects_unknown_constant(ra_fine) -> None:
    coarse, _, spec, _ = ra_fine
    with pytest.raises(RefinementError):
        lift_observations([parse_literal("loc*(book1, c99)")], spec, coarse.signature)


def test_lift_rejects_contradiction(ra_fine) -> None:
    coarse, _, spec, _ = ra_fine
    with pytest.raises(RefinementError):
        lift_observations([parse_literal("loc*(rob1, c1)"), parse_literal("-loc(rob1, office1)")], spec, coarse.signature)
