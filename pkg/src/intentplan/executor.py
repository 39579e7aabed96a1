"""Simulated world: ground truth, noisy actuation and sensing, scripted exogenous events."""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

from .dsl import Atom, Literal
from .grounding import GroundedDescription
from .semantics import State, successor

log = logging.getLogger(__name__)

SUCCESS = "success"
NO_EFFECT = "noeffect"


def family(name: str) -> str:
    return name.rstrip("*")


@dataclass(frozen=True)
class ActionModel:
    success: dict[str, float] = field(default_factory=lambda: {"move": 0.85, "pickup": 0.95, "putdown": 0.95})
    duration: dict[str, int] = field(default_factory=lambda: {"move": 15, "pickup": 5, "putdown": 5, "unlock": 5, "test": 1})
    accuracy: float = 0.90

    def __post_init__(self) -> None:
        for p in [*self.success.values(), self.accuracy]:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        if any(d < 0 for d in self.duration.values()):
            raise ValueError("durations must be non-negative")

    @classmethod
    def noise_free(cls) -> ActionModel:
        return cls(success={}, accuracy=1.0)

    def p_success(self, action: Atom) -> float:
        return self.success.get(family(action.name), 1.0)

    def time(self, action: Atom) -> int:
        return self.duration.get(family(action.name), 5)


Trigger = Union[int, Callable[[GroundedDescription, State], bool]]


@dataclass(frozen=True)
class ExoEvent:
    trigger: Trigger  # executed-action count, or a predicate over the true state
    action: Atom
    label: str = ""


@dataclass(frozen=True)
class ExoScript:
    entries: tuple[ExoEvent, ...] = ()


# Observation scope: which atoms the robot can sense in a given true state.
Scope = Callable[[GroundedDescription, State], Sequence[int]]


def room_scope(robot: str, loc: str = "loc") -> Scope:
    """Coarse sensing: everything about the robot itself and about its current place."""

    def scope(g: GroundedDescription, s: State) -> list[int]:
        here = {a.args[1] for a in g.true_atoms(s) if a.name == loc and a.args[0] == robot}
        out = []
        for i, atom in enumerate(g.atoms):
            if g.kind[i] == "static":
                continue
            if (atom.args and atom.args[0] == robot) or here & set(atom.args):
                out.append(i)
        return out

    return scope


def fine_scope(g: GroundedDescription, s: State) -> list[int]:
    """Fine sensing: the fluents whose test is currently executable."""
    out = []
    for i, atom in enumerate(g.atoms):
        if atom.name.startswith("can_test_") and s >> i & 1:
            target = Atom(atom.name[len("can_test_"):], atom.args[1:])
            out.append(g.atom_index[target])
    return out


@dataclass
class WorldState:
    g: GroundedDescription
    truth: State
    rng: random.Random
    clock: int = 0
    steps: int = 0
    fired: set[int] = field(default_factory=set)
    trace: list[str] = field(default_factory=list)

    @classmethod
    def create(cls, g: GroundedDescription, truth: State, seed: int | str) -> WorldState:
        return cls(g, truth, random.Random(seed))

    def log(self, kind: str, text: str) -> None:
        self.trace.append(f"t={self.clock} kind={kind} {text}")


@dataclass(frozen=True)
class ExecResult:
    verdict: str
    elapsed: int
    obs: tuple[Literal, ...]


def execute(action: Atom, world: WorldState, model: ActionModel, scope: Scope, script: ExoScript | None = None) -> ExecResult:
    """Attempt ``action``, let scripted events fire, then read what is in view (noisily)."""
    g = world.g
    roll = world.rng.random()
    nxt = successor(world.truth, g.action_id(action), g)
    ok = isinstance(nxt, int) and roll < model.p_success(action)
    if ok:
        world.truth = nxt
    elapsed = model.time(action)
    world.clock += elapsed
    world.steps += 1
    verdict = SUCCESS if ok else NO_EFFECT
    world.log("exec", f"action={action} result={verdict}")
    if script is not None:
        inject(script, world)
    return ExecResult(verdict, elapsed, observe(world, model, scope))


def observe(world: WorldState, model: ActionModel, scope: Scope) -> tuple[Literal, ...]:
    g = world.g
    out = []
    for aid in scope(g, world.truth):
        value = bool(world.truth >> aid & 1)
        if model.accuracy < 1.0 and world.rng.random() >= model.accuracy:
            value = not value
        out.append(Literal(g.atoms[aid], value))
    seen = [str(l.atom) for l in out if l.positive]
    world.log("obs", f"seen={';'.join(seen)} unseen={len(out) - len(seen)}")
    return tuple(out)


def test(literal_atom: Atom, world: WorldState, model: ActionModel) -> bool:
    """One extra noisy reading of a single fluent."""
    aid = world.g.atom_index[literal_atom]
    value = bool(world.truth >> aid & 1)
    if model.accuracy < 1.0 and world.rng.random() >= model.accuracy:
        value = not value
    world.clock += model.duration.get("test", 1)
    world.log("test", f"fluent={literal_atom} value={'true' if value else 'false'}")
    return value


def inject(script: ExoScript, world: WorldState) -> list[Atom]:
    """Fire every script entry whose trigger holds now (each at most once)."""
    applied = []
    g = world.g
    for k, ev in enumerate(script.entries):
        if k in world.fired:
            continue
        due = ev.trigger == world.steps if isinstance(ev.trigger, int) else ev.trigger(g, world.truth)
        if not due:
            continue
        world.fired.add(k)
        nxt = successor(world.truth, g.action_id(ev.action), g)
        if not isinstance(nxt, int):
            log.warning("scripted %s is not executable, skipped", ev.action)
            world.log("exo", f"action={ev.action} result=skipped")
            continue
        world.truth = nxt
        world.log("exo", f"action={ev.action}")
        applied.append(ev.action)
    return applied


@dataclass
class Executor:
    """A world plus its action model, script and sensing scope."""

    world: WorldState
    model: ActionModel
    script: ExoScript = ExoScript()
    scope: Scope = fine_scope

    def run(self, action: Atom) -> ExecResult:
        return execute(action, self.world, self.model, self.scope, self.script)

    def look(self) -> tuple[Literal, ...]:
        return observe(self.world, self.model, self.scope)

    def test(self, atom: Atom) -> bool:
        return test(atom, self.world, self.model)
