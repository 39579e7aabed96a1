"""Minimal-length planning by iterative deepening over the transition diagram."""
from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .dsl import Atom, Literal, parse_literals
from .grounding import GroundedDescription
from .semantics import Inconsistent, Inexecutable, State, successor

log = logging.getLogger(__name__)

MAX_HORIZON_COARSE = 20
MAX_HORIZON_FINE = 40


@dataclass(frozen=True)
class Goal:
    literals: tuple[Literal, ...]

    @classmethod
    def parse(cls, text: str) -> Goal:
        return cls(tuple(parse_literals(text)))

    def masks(self, g: GroundedDescription) -> tuple[int, int]:
        pos = neg = 0
        for lit in self.literals:
            bit = 1 << g.atom_index[lit.atom]
            if lit.positive:
                pos |= bit
            else:
                neg |= bit
        return pos, neg

    def holds(self, g: GroundedDescription, s: State) -> bool:
        pos, neg = self.masks(g)
        return s & pos == pos and not s & neg

    def __str__(self) -> str:
        return ", ".join(str(l) for l in self.literals)


@dataclass(frozen=True)
class Plan:
    actions: tuple[Atom, ...]

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def __str__(self) -> str:
        return " ; ".join(str(a) for a in self.actions)


@dataclass(frozen=True)
class Unsat:
    max_horizon: int


@dataclass(frozen=True)
class Reaches:
    state: State


@dataclass(frozen=True)
class FailsAt:
    step: int
    reason: str


class PlanningTimeout(Exception):
    def __init__(self, elapsed: float, nodes: int):
        super().__init__(f"planning timed out after {elapsed:.1f}s ({nodes} nodes)")
        self.elapsed = elapsed
        self.nodes = nodes


def relevant_actions(g: GroundedDescription, goal_atoms: Iterable[int]) -> list[int]:
    """Agent actions that can influence the goal, directly or by enabling each other.

    Anything else can be dropped from a plan without changing its outcome, so
    minimal plans never contain it.
    """
    derives: dict[int, set[int]] = {}
    for c in g.constraints:
        for a in c.atoms:
            derives.setdefault(a, set()).add(c.head)
    body_of: dict[int, list[int]] = {}
    for c in g.constraints:
        body_of.setdefault(c.head, []).extend(c.atoms)

    def affected(aid: int) -> set[int]:
        out = {law.head for law in g.causal[aid]}
        stack = list(out)
        while stack:
            x = stack.pop()
            for h in derives.get(x, ()):
                if h not in out:
                    out.add(h)
                    stack.append(h)
        return out

    effects = {a: affected(a) for a in g.agent_action_ids}
    relevant_atoms: set[int] = set()
    chosen: set[int] = set()
    frontier = list(goal_atoms)
    while frontier:
        new: list[int] = []
        for x in frontier:
            if x in relevant_atoms:
                continue
            relevant_atoms.add(x)
            new.extend(body_of.get(x, ()))
        frontier = []
        for x in new:
            if x not in relevant_atoms:
                frontier.append(x)
        if frontier:
            continue
        for a, eff in effects.items():
            if a not in chosen and eff & relevant_atoms:
                chosen.add(a)
                for law in g.causal[a]:
                    frontier.extend(_mask_atoms(law.pos | law.neg))
                for pos, neg in g.executability[a]:
                    frontier.extend(_mask_atoms(pos | neg))
        frontier = [x for x in frontier if x not in relevant_atoms]
    return sorted(chosen)


def _mask_atoms(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


@dataclass
class _Search:
    g: GroundedDescription
    actions: list[int]
    gpos: int
    gneg: int
    deadline: float | None
    nodes: int = 0
    start: float = field(default_factory=time.perf_counter)
    failed: dict[State, int] = field(default_factory=dict)
    cache: dict[State, list[tuple[int, State]]] = field(default_factory=dict)

    def children(self, s: State) -> list[tuple[int, State]]:
        kids = self.cache.get(s)
        if kids is None:
            kids = []
            for a in self.actions:
                nxt = successor(s, a, self.g)
                if isinstance(nxt, int):
                    kids.append((a, nxt))
            self.cache[s] = kids
        return kids

    def dfs(self, s: State, remaining: int, path: list[int]) -> bool:
        if s & self.gpos == self.gpos and not s & self.gneg:
            return True
        if remaining == 0 or self.failed.get(s, -1) >= remaining:
            return False
        self.nodes += 1
        if self.deadline is not None and not self.nodes & 255 and time.perf_counter() > self.deadline:
            raise PlanningTimeout(time.perf_counter() - self.start, self.nodes)
        for a, nxt in self.children(s):
            path.append(a)
            if self.dfs(nxt, remaining - 1, path):
                return True
            path.pop()
        self.failed[s] = remaining
        return False


def plan_minimal(
    g: GroundedDescription,
    init: State,
    goal: Goal,
    max_horizon: int = MAX_HORIZON_COARSE,
    timeout: float | None = None,
    actions: Sequence[int] | None = None,
) -> Plan | Unsat:
    """Shortest plan reaching ``goal``; ties broken lexicographically by action id."""
    gpos, gneg = goal.masks(g)
    if actions is None:
        actions = relevant_actions(g, _mask_atoms(gpos | gneg))
    search = _Search(g, sorted(actions), gpos, gneg,
                     None if timeout is None else time.perf_counter() + timeout)
    for depth in range(max_horizon + 1):
        if depth and search.deadline is not None and time.perf_counter() > search.deadline:
            raise PlanningTimeout(time.perf_counter() - search.start, search.nodes)
        path: list[int] = []
        if search.dfs(init, depth, path):
            log.debug("plan of length %d after %d nodes", depth, search.nodes)
            return Plan(tuple(g.actions[a] for a in path))
    return Unsat(max_horizon)


def verify_plan(g: GroundedDescription, init: State, plan: Plan | Sequence[Atom | str], goal: Goal) -> Reaches | FailsAt:
    acts = plan.actions if isinstance(plan, Plan) else tuple(plan)
    s = init
    for i, act in enumerate(acts):
        nxt = successor(s, g.action_id(act), g)
        if isinstance(nxt, Inexecutable):
            return FailsAt(i, "inexecutable")
        if isinstance(nxt, Inconsistent):
            return FailsAt(i, "inconsistent")
        s = nxt
    if not goal.holds(g, s):
        return FailsAt(len(acts), "goal-unsatisfied")
    return Reaches(s)


def bfs_distance(g: GroundedDescription, init: State, goal: Goal, max_depth: int = 64) -> int | None:
    """Oracle: breadth-first distance to the nearest goal state over all agent actions."""
    seen = {init}
    queue = deque([(init, 0)])
    while queue:
        s, d = queue.popleft()
        if goal.holds(g, s):
            return d
        if d == max_depth:
            continue
        for a in g.agent_action_ids:
            nxt = successor(s, a, g)
            if isinstance(nxt, int) and nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, d + 1))
    return None


PlanResult = Union[Plan, Unsat]
