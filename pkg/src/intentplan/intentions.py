"""Activities, mental state and intended-action selection."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

from .dsl import Atom
from .grounding import GroundedDescription
from .history import Hpd, ModelOfHistory, NotHpd
from .planning import Goal, Plan, Reaches, verify_plan
from .semantics import State


@dataclass(frozen=True)
class Activity:
    name: int
    goal: Goal
    components: tuple[Atom, ...]

    @property
    def length(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class MentalState:
    active_activity: Activity | None = None
    current_action_index: int = 0
    active_goal: Goal | None = None
    next_activity_name: int = 1

    @property
    def in_progress_activity(self) -> int | None:
        return None if self.active_activity is None else self.active_activity.name

    @property
    def in_progress_goal(self) -> Goal | None:
        return self.active_goal if self.active_activity is not None else None

    @property
    def next_action(self) -> Atom | None:
        act = self.active_activity
        if act is None or self.current_action_index >= act.length:
            return None
        return act.components[self.current_action_index]


@dataclass(frozen=True)
class Agent:
    action: Atom


@dataclass(frozen=True)
class Start:
    name: int


@dataclass(frozen=True)
class Stop:
    name: int


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class Replan:
    pass


IntendedAction = Union[Agent, Start, Stop, Done, Replan]


class PlanRejected(ValueError):
    pass


def select(mental: MentalState, goal: Goal) -> MentalState:
    """Exogenous goal selection (the human asks for something)."""
    return replace(mental, active_goal=goal)


def abandon(mental: MentalState) -> MentalState:
    return replace(mental, active_goal=None, active_activity=None, current_action_index=0)


def create_activity(
    mental: MentalState, goal: Goal, plan: Plan,
    g: GroundedDescription | None = None, init: State | None = None,
) -> tuple[Activity, MentalState]:
    """Name a plan as a fresh activity; checked against ``init`` when given."""
    if g is not None and init is not None and not isinstance(verify_plan(g, init, plan, goal), Reaches):
        raise PlanRejected(f"plan does not reach {goal}")
    act = Activity(mental.next_activity_name, goal, tuple(plan.actions))
    return act, replace(mental, next_activity_name=mental.next_activity_name + 1)


def start(mental: MentalState, activity: Activity) -> MentalState:
    if mental.active_activity is not None:
        raise ValueError(f"activity {mental.active_activity.name} is still active")
    return replace(mental, active_activity=activity, current_action_index=0)


def stop(mental: MentalState) -> MentalState:
    return replace(mental, active_activity=None, current_action_index=0)


def projected_success(activity: Activity, index: int, model: ModelOfHistory, g: GroundedDescription) -> bool:
    rest = activity.components[index:]
    return isinstance(verify_plan(g, model.final, rest, activity.goal), Reaches)


def next_intended_action(mental: MentalState, model: ModelOfHistory, g: GroundedDescription) -> IntendedAction:
    goal = mental.active_goal
    if goal is None or goal.holds(g, model.final):
        return Done()
    act = mental.active_activity
    if act is None:
        return Replan()
    if projected_success(act, mental.current_action_index, model, g):
        return Agent(act.components[mental.current_action_index])
    return Stop(act.name)


def advance(mental: MentalState, verdict: Hpd | NotHpd) -> MentalState:
    if isinstance(verdict, Hpd):
        return replace(mental, current_action_index=mental.current_action_index + 1)
    return mental
