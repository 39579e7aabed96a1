"""Complexity levels L1-L8 for the refinement and zooming experiments."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache

from .controller import FineSetup, Trial, world_description
from .dsl import Atom, Literal, SystemDescription, parse_domain
from .grounding import ground
from .planning import Goal
from .refinement import refine, spec_of
from .semantics import complete_state


@dataclass(frozen=True)
class LevelSpec:
    id: str
    objects: tuple[tuple[int, int], ...]  # (count, parts per object)
    rooms: int
    cells: int  # per room

    @property
    def n_objects(self) -> int:
        return sum(n for n, _ in self.objects)

    @property
    def n_parts(self) -> int:
        return sum(n * k for n, k in self.objects)

    @property
    def n_cells(self) -> int:
        return self.rooms * self.cells


LEVELS: dict[str, LevelSpec] = {
    "L1": LevelSpec("L1", ((1, 1),), 2, 2),
    "L2": LevelSpec("L2", ((2, 2),), 3, 2),
    "L3": LevelSpec("L3", ((3, 3),), 4, 4),
    "L4": LevelSpec("L4", ((4, 4),), 5, 5),
    "L5": LevelSpec("L5", ((8, 2),), 5, 9),
    "L6": LevelSpec("L6", ((8, 2), (4, 1)), 5, 12),
    "L7": LevelSpec("L7", ((8, 2), (4, 1)), 5, 16),
    "L8": LevelSpec("L8", ((16, 2), (8, 1)), 5, 16),
}

FINE_AXIOMS = """\
  move*(R, C) causes loc*(R, C)
  pickup*(R, Op) causes in_hand*(R, Op)
  putdown*(R, Op) causes -in_hand*(R, Op)
  -loc*(Th, C2) if loc*(Th, C1), C1 != C2
  loc*(O, C) if loc*(R, C), in_hand*(R, Op), component(Op, O)
  impossible move*(R, C2) if loc*(R, C1), -next_to*(C1, C2)
  impossible pickup*(R, Op) if loc*(R, C1), loc*(O, C2), component(Op, O), C1 != C2
  impossible pickup*(R, Op) if in_hand*(R, Op2)
  impossible putdown*(R, Op) if -in_hand*(R, Op)
  next_to*(C2, C1) if next_to*(C1, C2)
"""


def rooms(spec: LevelSpec) -> list[str]:
    return [f"room{i + 1}" for i in range(spec.rooms)]


def objects(spec: LevelSpec) -> list[str]:
    return [f"obj{i + 1}" for i in range(spec.n_objects)]


def cells_by_room(spec: LevelSpec) -> dict[str, list[str]]:
    return {r: [f"c{i * spec.cells + j + 1}" for j in range(spec.cells)] for i, r in enumerate(rooms(spec))}


def parts_by_object(spec: LevelSpec) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    names = iter(objects(spec))
    for count, k in spec.objects:
        for _ in range(count):
            o = next(names)
            out[o] = [f"{o}_p{j + 1}" for j in range(k)]
    return out


def cell_links(spec: LevelSpec) -> list[tuple[str, str]]:
    """Grid adjacency inside each room plus one doorway between consecutive rooms."""
    cols = math.ceil(math.sqrt(spec.cells))
    links = []
    by_room = cells_by_room(spec)
    for cells in by_room.values():
        for k, c in enumerate(cells):
            if (k + 1) % cols and k + 1 < len(cells):
                links.append((c, cells[k + 1]))
            if k + cols < len(cells):
                links.append((c, cells[k + cols]))
    names = list(by_room)
    for a, b in zip(names, names[1:]):
        links.append((by_room[a][-1], by_room[b][0]))
    return links


def level_text(spec: LevelSpec) -> str:
    rs = rooms(spec)
    obs = objects(spec)
    lines = [
        f"# Level {spec.id}: {spec.rooms} rooms x {spec.cells} cells, {spec.n_objects} objects, {spec.n_parts} parts.",
        "sorts:",
        "  place = {" + ", ".join(rs) + "}",
        "  thing",
        "  robot < thing = {rob1}",
        "  object < thing = {" + ", ".join(obs) + "}",
        "statics:",
        "  next_to(place, place)",
        "fluents:",
        "  basic loc(thing, place)",
        "  basic in_hand(robot, object)",
        "actions:",
        "  agent move(robot, place)",
        "  agent pickup(robot, object)",
        "  agent putdown(robot, object)",
        "  exogenous exo_move(object, place)",
        "axioms:",
        "  move(R, P) causes loc(R, P)",
        "  pickup(R, O) causes in_hand(R, O)",
        "  putdown(R, O) causes -in_hand(R, O)",
        "  exo_move(O, P) causes loc(O, P)",
        "  -loc(Th, P2) if loc(Th, P1), P1 != P2",
        "  loc(O, P) if loc(R, P), in_hand(R, O)",
        "  impossible move(R, P) if loc(R, P1), -next_to(P, P1)",
        "  impossible pickup(R, O) if loc(R, P1), loc(O, P2), P1 != P2",
        "  impossible pickup(R, O) if in_hand(R, O2)",
        "  impossible putdown(R, O) if -in_hand(R, O)",
        "  impossible exo_move(O, P) if in_hand(R, O)",
        "  impossible exo_move(O, P) if loc(O, P)",
        "  next_to(P2, P1) if next_to(P1, P2)",
    ]
    lines += [f"  next_to({a}, {b})" for a, b in zip(rs, rs[1:])]
    by_room = cells_by_room(spec)
    parts = parts_by_object(spec)
    lines += [
        "refinement:",
        "  place* = {" + ", ".join(f"{c}: {r}" for r in rs for c in by_room[r]) + "}",
        "  object* = {" + ", ".join(f"{p}: {o}" for o in obs for p in parts[o]) + "}",
        "  next_to*(place*, place*) refines next_to",
        "  loc*(thing, place*) refines loc",
        "  in_hand*(robot, object*) refines in_hand",
        "  move*(robot, place*) refines move",
        "  pickup*(robot, object*) refines pickup",
        "  putdown*(robot, object*) refines putdown",
        "  test loc*(Th, C) by R if loc*(R, C2), component(C2, P), component(C, P)",
        "  test in_hand*(R, Op) by R",
    ]
    lines += FINE_AXIOMS.rstrip("\n").split("\n")
    lines += [f"  next_to*({a}, {b})" for a, b in cell_links(spec)]
    return "\n".join(lines) + "\n"


def level_domain(level: str | LevelSpec) -> SystemDescription:
    spec = LEVELS[level] if isinstance(level, str) else level
    return parse_domain(level_text(spec), f"{spec.id}.dom")


@dataclass(frozen=True)
class LevelTask:
    """Find ``target`` and bring it to ``destination``."""

    level: str
    seed: int
    target: str
    destination: str
    placement: tuple[tuple[str, str], ...]  # thing -> cell, robot included

    def cell_of(self, thing: str) -> str:
        return dict(self.placement)[thing]


def generate_level(level: str, seed: int) -> LevelTask:
    """Uniform random placement of the robot and objects; the target must change rooms.

    Objects are exchangeable, so the target is always ``obj1``. The robot, the
    target and the destination are drawn first from a stream keyed by the seed
    alone: levels with the same cells (L7, L8) then pose the same task and
    differ only in the extra objects.
    """
    spec = LEVELS[level]
    rng = random.Random(f"task:{seed}")
    by_room = cells_by_room(spec)
    all_cells = [c for cs in by_room.values() for c in cs]
    room_of = {c: r for r, cs in by_room.items() for c in cs}
    names = objects(spec)
    placement = [("rob1", rng.choice(all_cells)), (names[0], rng.choice(all_cells))]
    start_room = room_of[placement[1][1]]
    destination = rng.choice([r for r in rooms(spec) if r != start_room])
    for o in names[1:]:
        placement.append((o, rng.choice(all_cells)))
    return LevelTask(level, seed, names[0], destination, tuple(placement))


@lru_cache(maxsize=2)
def fine_setup(level: str) -> FineSetup:
    """Coarse and refined descriptions of a level plus the world's grounding (cached per process)."""
    coarse = level_domain(level)
    fine = refine(coarse)
    return FineSetup(coarse, fine, spec_of(coarse), ground(coarse), world_description(fine))


def level_trial(task: LevelTask, setup: FineSetup) -> Trial:
    """The world starts from the task placement; the robot knows every object's room, not its cell."""
    tg = setup.tg
    facts = {tg.atom_id(Atom("loc*", (th, c))): True for th, c in task.placement}
    truth = complete_state(facts, tg)
    if not isinstance(truth, int):
        raise ValueError(f"inconsistent placement for {task.level} seed {task.seed}")
    goal = Goal((Literal(Atom("loc", (task.target, task.destination))),
                 Literal(Atom("in_hand", ("rob1", task.target)), False)))
    beliefs = tuple(Literal(Atom("loc", (th, setup.spec.component_map[c]))) for th, c in task.placement)
    return Trial(goal, truth, beliefs, label=f"{task.level}-{task.seed}")
