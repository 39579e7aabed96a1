from __future__ import annotations

import pytest

from intentplan.dsl import builtin_domain, parse_domain
from intentplan.grounding import GroundedDescription, ground

TWO_ROOM = """
sorts:
  place = {r1, r2}
  thing
  robot < thing = {rob}
  object < thing = {box}
statics:
  next_to(place, place)
fluents:
  basic loc(thing, place)
  basic in_hand(robot, object)
actions:
  agent move(robot, place)
  agent pickup(robot, object)
  agent putdown(robot, object)
  exogenous exo_move(object, place)
axioms:
  move(R, P) causes loc(R, P)
  pickup(R, O) causes in_hand(R, O)
  putdown(R, O) causes -in_hand(R, O)
  exo_move(O, P) causes loc(O, P)
  -loc(Th, P2) if loc(Th, P1), P1 != P2
  loc(O, P) if loc(R, P), in_hand(R, O)
  impossible move(R, P) if loc(R, P1), -next_to(P, P1)
  impossible pickup(R, O) if loc(R, P1), loc(O, P2), P1 != P2
  impossible pickup(R, O) if in_hand(R, O2)
  impossible putdown(R, O) if -in_hand(R, O)
  impossible exo_move(O, P) if in_hand(R, O)
  impossible exo_move(O, P) if loc(O, P)
  next_to(r1, r2)
  next_to(P2, P1) if next_to(P1, P2)
defaults:
  default 1: loc(X, r2) if object(X)
  default 2: loc(X, r1) if object(X)
"""


def ra_subset(places: list[str], books: list[str]) -> str:
    """The RA domain cut down to the given rooms and books (for exhaustive oracles)."""
    from intentplan.dsl import builtin_text

    lines = []
    section = ""
    for line in builtin_text("ra").splitlines():
        s = line.strip()
        if s.endswith(":") and not s.startswith("default"):
            section = s
        if s.startswith("place ="):
            line = "  place = {" + ", ".join(places) + "}"
        elif s.startswith("book <"):
            line = "  book < object = {" + ", ".join(books) + "}"
        elif section == "axioms:" and s.startswith(("next_to(", "lockable(", "obj_color(")) and "if" not in s:
            args = s[s.index("(") + 1:s.index(")")].replace(" ", "").split(",")
            if any(a not in places + books + ["red", "blue"] for a in args):
                continue
        elif "library" in s or "office1" in s:
            if s.startswith("default"):
                target = places[-1] if "library" in s else places[0]
                line = line.replace("library", target).replace("office1", target)
        lines.append(line)
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def ra() -> GroundedDescription:
    return ground(builtin_domain("ra"))


@pytest.fixture(scope="session")
def two_room() -> GroundedDescription:
    return ground(parse_domain(TWO_ROOM, "two_room.dom"))
