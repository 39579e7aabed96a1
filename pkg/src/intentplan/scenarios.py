"""Paired-trial inputs for the RA domain: scenarios 1-5 and the two narrated traces."""
from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

from .controller import Trial
from .dsl import Atom, Literal, builtin_domain, parse_literal
from .executor import ExoEvent, ExoScript
from .grounding import GroundedDescription, ground
from .planning import Goal, Plan, plan_minimal
from .semantics import State, complete_state

BOTH_BOOKS = Goal.parse("loc(book1, library), loc(book2, library), -in_hand(rob1, book1), -in_hand(rob1, book2)")
ROOMS = ("office1", "office2", "kitchen")  # everything but the library
SCENARIOS = (1, 2, 3, 4, 5)
MAX_ATTEMPTS = 100


def _atom(text: str) -> Atom:
    return parse_literal(text).atom


class SamplerExhausted(RuntimeError):
    pass


@lru_cache(maxsize=1)
def ra() -> GroundedDescription:
    return ground(builtin_domain("ra"))


def _holds(g: GroundedDescription, s: State, text: str) -> bool:
    return bool(s >> g.atom_id(_atom(text)) & 1)


def _book1_shelved(g: GroundedDescription, s: State) -> bool:
    return _holds(g, s, "loc(book1, library)") and not _holds(g, s, "in_hand(rob1, book1)")


def _carrying_book2_after_delivery(g: GroundedDescription, s: State) -> bool:
    return _holds(g, s, "in_hand(rob1, book2)") and _holds(g, s, "loc(book1, library)")


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    name: str


SPECS = {
    1: ScenarioSpec(1, "standard planning task"),
    2: ScenarioSpec(2, "unexpected success"),
    3: ScenarioSpec(3, "object moved away before pickup"),
    4: ScenarioSpec(4, "object moved into view"),
    5: ScenarioSpec(5, "delivered object removed"),
}


def initial_state(g: GroundedDescription, robot: str, book2: str) -> State:
    """The robot holds book1 in ``robot``; book2 lies in ``book2``; nothing is locked."""
    facts = [f"loc(rob1, {robot})", "in_hand(rob1, book1)", f"loc(book2, {book2})"]
    s = complete_state({g.atom_id(_atom(f)): True for f in facts}, g)
    if not isinstance(s, int):
        raise ValueError(f"inconsistent initial conditions {facts}")
    return s


def observed(robot: str, book2: str) -> tuple[Literal, ...]:
    return tuple(Literal(_atom(f)) for f in (f"loc(rob1, {robot})", "in_hand(rob1, book1)", f"loc(book2, {book2})"))


def _exo(trigger, book: str, place: str, label: str) -> ExoEvent:
    return ExoEvent(trigger, Atom("exo_move", (book, place)), label)


def _sample(sid: int, rng: random.Random) -> tuple[str, str, str, ExoScript]:
    """(robot room, book2's true room, book2's believed room, script)."""
    robot = rng.choice(ROOMS)
    if sid == 1:
        b2 = rng.choice(ROOMS)
        return robot, b2, b2, ExoScript()
    if sid == 2:
        b2 = rng.choice(ROOMS)
        return robot, b2, b2, ExoScript((_exo(_book1_shelved, "book2", "library", "book2 shelved by someone"),))
    if sid == 3:
        away = rng.choice([p for p in (*ROOMS, "library") if p != robot])
        return robot, robot, robot, ExoScript((_exo(1, "book2", away, "book2 taken away"),))
    if sid == 4:
        b2 = rng.choice([p for p in ROOMS if p != robot])
        return robot, b2, b2, ExoScript((_exo(0, "book2", robot, "book2 brought to the robot"),))
    if sid == 5:
        b2 = rng.choice(ROOMS)
        dest = rng.choice(ROOMS)
        return robot, b2, b2, ExoScript((_exo(_carrying_book2_after_delivery, "book1", dest, "book1 removed"),))
    raise ValueError(f"unknown scenario {sid}")


def generate_scenario(sid: int, seed: int) -> Trial:
    """Uniform initial conditions for scenario ``sid``; only solvable instances are returned."""
    if sid not in SPECS:
        raise ValueError(f"unknown scenario {sid}")
    g = ra()
    rng = random.Random(f"scenario{sid}:{seed}")
    for _ in range(MAX_ATTEMPTS):
        robot, b2, believed, script = _sample(sid, rng)
        truth = initial_state(g, robot, b2)
        if isinstance(plan_minimal(g, truth, BOTH_BOOKS), Plan):
            return Trial(BOTH_BOOKS, truth, observed(robot, believed), script, f"s{sid}-{seed}")
    raise SamplerExhausted(f"scenario {sid} seed {seed}: no solvable instance in {MAX_ATTEMPTS} draws")


def narrated_trace(n: int) -> Trial:
    """The two narrated runs: book2 shelved by someone else (1), book1 taken from the library (2)."""
    g = ra()
    if n == 1:
        script = ExoScript((_exo(_book1_shelved, "book2", "library", "book2 shelved by someone"),))
        return Trial(BOTH_BOOKS, initial_state(g, "kitchen", "office2"), observed("kitchen", "office2"), script, "trace1")
    if n == 2:
        script = ExoScript((_exo(_carrying_book2_after_delivery, "book1", "kitchen", "book1 removed"),))
        return Trial(BOTH_BOOKS, initial_state(g, "kitchen", "kitchen"), observed("kitchen", "kitchen"), script, "trace2")
    raise ValueError(f"unknown trace {n}")
