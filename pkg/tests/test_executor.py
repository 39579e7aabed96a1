from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from intentplan.dsl import Atom, parse_domain
from intentplan.executor import (
    NO_EFFECT,
    SUCCESS,
    ActionModel,
    ExoEvent,
    ExoScript,
    Executor,
    WorldState,
    execute,
    inject,
    room_scope,
    test as sense,
    fine_scope,
)
from intentplan.grounding import ground
from intentplan.semantics import complete_state, successor

from conftest import TWO_ROOM
from test_history import act


def world(g, seed: int = 0, *facts: str) -> WorldState:
    facts = facts or ("loc(rob, r1)", "loc(box, r1)")
    s = complete_state({g.atom_id(act(f)): True for f in facts}, g)
    return WorldState.create(g, s, seed)


def test_model_validation() -> None:
    with pytest.raises(ValueError):
        ActionModel(accuracy=1.5)
    with pytest.raises(ValueError):
        ActionModel(success={"move": -0.1})
    with pytest.raises(ValueError):
        ActionModel(duration={"move": -1})


def test_defaults() -> None:
    m = ActionModel()
    assert m.p_success(act("move(rob, r2)")) == 0.85
    assert m.p_success(Atom("move*", ("rob1", "c1"))) == 0.85
    assert (m.time(act("move(rob, r2)")), m.time(act("pickup(rob, box)")), m.time(act("putdown(rob, box)"))) == (15, 5, 5)
    assert m.accuracy == 0.9


def test_move_success_rate(two_room) -> None:
    w = world(two_room, 11)
    m = ActionModel()
    hits = 0
    n = 10_000
    for _ in range(n):
        w.truth = world(two_room).truth
        hits += execute(act("move(rob, r2)"), w, m, room_scope("rob")).verdict == SUCCESS
    assert abs(hits / n - 0.85) < 0.02
    # goodness of fit against the configured probability
    assert chisquare([hits, n - hits], [0.85 * n, 0.15 * n]).pvalue > 0.001


def test_observation_accuracy(two_room) -> None:
    w = world(two_room, 5)
    m = ActionModel()
    wrong = total = 0
    for _ in range(2000):
        for lit in Executor(w, m, scope=room_scope("rob")).look():
            total += 1
            wrong += two_room.holds(w.truth, lit.atom) != lit.positive
    assert abs(wrong / total - 0.10) < 0.02


def test_failure_costs_time(two_room) -> None:
    w = world(two_room)
    res = execute(act("pickup(rob, box)"), w, ActionModel(success={"pickup": 0.0}), room_scope("rob"))
    assert res.verdict == NO_EFFECT and res.elapsed == 5 and w.clock == 5


def test_inexecutable_is_no_effect(two_room) -> None:
    w = world(two_room)
    before = w.truth
    res = execute(act("putdown(rob, box)"), w, ActionModel.noise_free(), room_scope("rob"))
    assert res.verdict == NO_EFFECT and w.truth == before and w.clock == 5


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(["move(rob, r1)", "move(rob, r2)", "pickup(rob, box)", "putdown(rob, box)"]), max_size=8))
def test_noise_free_matches_semantics(two_room, actions: list[str]) -> None:
    w = world(two_room)
    s = w.truth
    for a in actions:
        res = execute(act(a), w, ActionModel.noise_free(), room_scope("rob"))
        nxt = successor(s, two_room.action_id(act(a)), two_room)
        s = nxt if isinstance(nxt, int) else s
        assert w.truth == s
        assert res.verdict == (SUCCESS if isinstance(nxt, int) else NO_EFFECT)
        assert all(two_room.holds(s, l.atom) == l.positive for l in res.obs)


def test_room_scope(two_room) -> None:
    w = world(two_room, 0, "loc(rob, r1)", "loc(box, r2)")
    seen = {str(l.atom) for l in Executor(w, ActionModel.noise_free(), scope=room_scope("rob")).look()}
    assert "loc(box, r1)" in seen and "loc(box, r2)" not in seen


def test_scripts_fire_once(two_room) -> None:
    w = world(two_room)
    script = ExoScript((ExoEvent(1, act("exo_move(box, r2)")),))
    m = ActionModel.noise_free()
    execute(act("move(rob, r2)"), w, m, room_scope("rob"), script)
    assert two_room.holds(w.truth, act("loc(box, r2)"))
    execute(act("move(rob, r1)"), w, m, room_scope("rob"), script)
    assert [l for l in w.trace if "kind=exo" in l] == ["t=15 kind=exo action=exo_move(box, r2)"]


def test_predicate_trigger_and_skip(two_room) -> None:
    w = world(two_room)
    held = lambda g, s: g.holds(s, act("in_hand(rob, box)"))  # noqa: E731
    script = ExoScript((ExoEvent(held, act("exo_move(box, r2)")),))
    assert inject(script, w) == []
    execute(act("pickup(rob, box)"), w, ActionModel.noise_free(), room_scope("rob"), script)
    # a held box cannot be moved by someone else
    assert "result=skipped" in w.trace[-2]


def test_single_test_reading(two_room) -> None:
    w = world(two_room)
    assert sense(act("loc(box, r1)"), w, ActionModel.noise_free()) is True
    assert w.clock == 1


def test_fine_scope_is_the_robot_room() -> None:
    from intentplan.levels import level_domain
    from intentplan.refinement import refine

    g = ground(refine(level_domain("L2")))
    s = complete_state({g.atom_id(Atom("loc*", ("rob1", "c1"))): True, g.atom_id(Atom("loc*", ("obj1", "c4"))): True,
                        g.atom_id(Atom("loc*", ("obj2", "c2"))): True}, g)
    names = {g.atoms[i] for i in fine_scope(g, s)}
    assert Atom("loc*", ("obj2", "c2")) in names and Atom("loc*", ("obj2", "c1")) in names
    assert not any(a.name == "loc*" and a.args[1] in ("c3", "c4") for a in names)


def run_script(two_room, seed: int) -> list[str]:
    w = world(two_room, seed)
    exe = Executor(w, ActionModel(), ExoScript((ExoEvent(2, act("exo_move(box, r2)")),)), room_scope("rob"))
    for a in ["pickup(rob, box)", "move(rob, r2)", "putdown(rob, box)", "move(rob, r1)"]:
        exe.run(act(a))
    return w.trace


def test_deterministic_trace(two_room) -> None:
    assert run_script(two_room, 4) == run_script(two_room, 4)
    assert any(run_script(two_room, 4) != run_script(two_room, s) for s in range(5, 10))
