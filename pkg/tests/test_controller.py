from __future__ import annotations

from dataclasses import replace

import pytest

from intentplan.controller import (
    ControllerConfig,
    RunRecord,
    _relevant,
    contradicted,
    expected_effects,
    monitored_atoms,
    run_fine,
    run_goal,
    run_paired,
)
from intentplan.dsl import Literal, parse_literal
from intentplan.executor import ActionModel
from intentplan.history import Attempt, History, Obs
from intentplan.levels import fine_setup, generate_level, level_trial
from intentplan.scenarios import generate_scenario, narrated_trace, ra

from test_history import act

ATI = ControllerConfig(mode="ATI")
TP = ControllerConfig(mode="TP")


def executed(record: RunRecord) -> list[str]:
    return [line.split("action=")[1].split(" result=")[0] for line in record.trace if "kind=exec" in line]


def first_plan(record: RunRecord) -> str:
    return next(line.split("actions=")[1] for line in record.trace if "kind=plan" in line)


def test_config_validation() -> None:
    with pytest.raises(ValueError):
        ControllerConfig(fine_timeout=0)
    with pytest.raises(ValueError):
        ControllerConfig(mode="BDI")


def test_expected_effects_and_contradiction(ra) -> None:
    s = generate_scenario(1, 0).truth
    eff = expected_effects(ra, s, act("putdown(rob1, book1)"))
    assert eff == [parse_literal("-in_hand(rob1, book1)")]
    assert contradicted(eff, [parse_literal("in_hand(rob1, book1)")])
    assert not contradicted(eff, [parse_literal("loc(book2, kitchen)")])


def test_monitored_atoms_for_pickup(ra) -> None:
    watch = {str(a) for a in monitored_atoms(ra, act("pickup(rob1, book2)"))}
    assert "in_hand(rob1, book2)" in watch and "loc(book2, kitchen)" in watch
    assert not any("book1" in a for a in watch)


def test_relevance_filter() -> None:
    obs = [parse_literal(x) for x in ("loc(book1, library)", "loc(book2, kitchen)", "in_hand(rob1, book2)")]
    kept = _relevant(obs, {"book1", "library"}, {parse_literal("in_hand(rob1, book2)").atom})
    assert kept == [obs[0], obs[2]]


def test_trace1_ati_stops_early() -> None:
    r = run_goal(ra(), narrated_trace(1), ATI)
    assert r.goal_achieved and r.believed_achieved
    assert r.actions_executed < 8
    assert "move(rob1, office2)" not in executed(r)
    assert "exo_move(book2, library)" in "\n".join(r.trace)


def test_trace1_tp_wastes_actions() -> None:
    r = run_goal(ra(), narrated_trace(1), TP)
    assert r.goal_achieved
    assert "move(rob1, office2)" in executed(r)
    assert r.plans_computed > 1


def test_trace2_tp_believes_wrongly() -> None:
    r = run_goal(ra(), narrated_trace(2), TP)
    assert r.believed_achieved and not r.goal_achieved
    assert r.plans_computed == 1


def test_trace2_ati_replans_and_succeeds() -> None:
    r = run_goal(ra(), narrated_trace(2), ATI)
    assert r.goal_achieved and r.plans_computed == 2
    assert any("action=stop(1)" in line for line in r.trace)


@pytest.mark.parametrize("seed", range(5))
def test_scenario1_both_succeed_with_one_plan(seed: int) -> None:
    trial = generate_scenario(1, seed)
    for config in (ATI, TP):
        r = run_goal(ra(), trial, config)
        assert r.goal_achieved and r.plans_computed == 1


@pytest.mark.parametrize("seed", range(5))
def test_scenario1_pairs_share_plan(seed: int) -> None:
    a, t = run_paired(ra(), generate_scenario(1, seed), (ATI, TP))
    assert first_plan(a) == first_plan(t)
    assert a.actions_executed == t.actions_executed


@pytest.mark.parametrize("seed", range(5))
def test_scenario2_ati_executes_fewer(seed: int) -> None:
    a, t = run_paired(ra(), generate_scenario(2, seed), (ATI, TP))
    assert a.actions_executed < t.actions_executed
    assert a.execution_time < t.execution_time


def test_pairs_need_one_seed() -> None:
    with pytest.raises(ValueError):
        run_paired(ra(), generate_scenario(1, 0), (ATI, replace(TP, seed=1)))


def test_identical_configs_identical_records() -> None:
    a, b = run_paired(ra(), generate_scenario(3, 2), (ATI, ATI))
    assert replace(a, planning_time=0, coarse_time=0) == replace(b, planning_time=0, coarse_time=0)


@pytest.mark.parametrize("sid", [1, 2, 3, 4, 5])
def test_ati_done_is_sound(sid: int) -> None:
    for seed in range(6):
        r = run_goal(ra(), generate_scenario(sid, seed), ATI)
        assert r.believed_achieved and r.goal_achieved


def _steps(history: History) -> dict[int, object]:
    return {r.step: r.action for r in history.records if isinstance(r, Attempt)}


@pytest.mark.parametrize("sid", [2, 3, 5])
def test_tp_only_sees_its_action(sid: int) -> None:
    g = ra()
    for seed in range(4):
        r = run_goal(g, generate_scenario(sid, seed), TP)
        h = History.from_log(r.history)
        acts = _steps(h)
        for o in h.observations():
            if o.step == 0:
                continue
            assert o.fluent in monitored_atoms(g, acts[o.step - 1])


def test_noisy_coarse_run_is_reproducible() -> None:
    cfg = replace(ATI, action_model=ActionModel(), seed=9)
    a = run_goal(ra(), generate_scenario(3, 1), cfg)
    b = run_goal(ra(), generate_scenario(3, 1), cfg)
    assert a.trace == b.trace


@pytest.mark.parametrize("level", ["L1", "L2", "L3"])
def test_fine_runs_with_zoom(level: str) -> None:
    setup = fine_setup(level)
    for seed in range(3):
        task = generate_level(level, seed)
        r = run_fine(setup, level_trial(task, setup), task.cell_of("rob1"),
                     ControllerConfig(action_model=ActionModel(), seed=seed))
        assert r.completed and r.goal_achieved
        assert r.fine_plans >= 1 and r.fine_time > 0


def test_fine_run_without_zoom() -> None:
    setup = fine_setup("L2")
    task = generate_level("L2", 1)
    r = run_fine(setup, level_trial(task, setup), task.cell_of("rob1"),
                 ControllerConfig(zooming=False, action_model=ActionModel(), seed=1))
    assert r.goal_achieved


def test_fine_timeout_is_recorded() -> None:
    setup = fine_setup("L3")
    task = generate_level("L3", 0)
    r = run_fine(setup, level_trial(task, setup), task.cell_of("rob1"),
                 ControllerConfig(zooming=False, fine_timeout=1e-9, action_model=ActionModel()))
    assert not r.goal_achieved and not r.completed
    assert r.reason.startswith("fine-plan timeout")


def test_fine_trace_reproducible() -> None:
    setup = fine_setup("L2")
    task = generate_level("L2", 4)
    runs = [run_fine(setup, level_trial(task, setup), task.cell_of("rob1"),
                     ControllerConfig(action_model=ActionModel(), seed=4)) for _ in range(2)]
    assert runs[0].trace == runs[1].trace
