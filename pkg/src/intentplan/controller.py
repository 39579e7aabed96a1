"""The control loop: diagnose, pick the intended action, refine it and execute.

Two coarse strategies are provided. ``ATI`` keeps an activity, diagnoses the
history before every step and watches everything relevant to the current
transition and the goal. ``TP`` plans once, only checks the outcome of the
action it is executing and replans when that action fails. In fine mode each
coarse action of ``ATI`` is carried out by planning over the zoomed (or the
full) fine description.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .dsl import Atom, Literal, SystemDescription
from .executor import SUCCESS, ActionModel, ExecResult, Executor, ExoScript, WorldState, inject, room_scope, fine_scope
from .grounding import GroundedDescription, GroundingBudgetExceeded, ground
from .history import History, Hpd, NotHpd, Attempt, ModelOfHistory, NoModel, cautious_model, consistent_model
from .intentions import (
    Agent,
    Done,
    MentalState,
    Replan,
    Stop,
    advance,
    create_activity,
    next_intended_action,
    select,
    start,
    stop,
)
from .planning import MAX_HORIZON_COARSE, MAX_HORIZON_FINE, Goal, Plan, PlanningTimeout, plan_minimal
from .refinement import (
    RefinementSpec,
    Transition,
    fine_goal,
    fine_state,
    lift_observations,
    relevant_constants,
    zoom,
)
from .semantics import State, direct_effects, successor

log = logging.getLogger(__name__)

ROBOT = "rob1"


@dataclass(frozen=True)
class ControllerConfig:
    mode: str = "ATI"  # ATI | TP
    zooming: bool = True
    max_horizon: int = MAX_HORIZON_COARSE
    fine_horizon: int = MAX_HORIZON_FINE
    fine_timeout: float = 60.0
    max_exogenous: int = 2
    seed: int = 0
    max_steps: int = 40  # coarse actions attempted per run
    max_fine_steps: int = 60  # fine actions per coarse action
    action_model: ActionModel = field(default_factory=ActionModel.noise_free)

    def __post_init__(self) -> None:
        if self.mode not in ("ATI", "TP"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.fine_timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class RunRecord:
    goal_achieved: bool
    believed_achieved: bool
    plans_computed: int
    planning_time: float
    execution_time: int
    actions_executed: int
    trace: tuple[str, ...]
    reason: str = ""
    coarse_time: float = 0.0
    fine_time: float = 0.0
    fine_plans: int = 0
    history: str = ""  # the coarse history, in log form
    plan_lengths: tuple[int, ...] = ()  # every coarse plan, in order

    @property
    def completed(self) -> bool:
        return self.reason in ("done", "plan exhausted")

    @property
    def fine_time_per_plan(self) -> float:
        return self.fine_time / self.fine_plans if self.fine_plans else 0.0


@dataclass(frozen=True)
class Trial:
    """Everything both strategies of a paired trial share."""

    goal: Goal
    truth: State  # initial world state, over the world's description
    beliefs: tuple[Literal, ...]  # step-0 coarse observations
    script: ExoScript = ExoScript()
    label: str = ""


class _Abort(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# ---------------------------------------------------------------------------
# outcomes of one coarse action


@dataclass(frozen=True)
class Outcome:
    ok: bool
    obs: tuple[Literal, ...]


def expected_effects(g: GroundedDescription, s: State, action: Atom) -> list[Literal]:
    eff = direct_effects(g, s, g.action_id(action))
    if eff is None:
        return []
    e_set, e_val = eff
    return [Literal(g.atoms[i], bool(e_val >> i & 1)) for i in range(e_set.bit_length()) if e_set >> i & 1]


def contradicted(expected: Sequence[Literal], obs: Iterable[Literal]) -> bool:
    want = {l.atom: l.positive for l in expected}
    return any(l.atom in want and want[l.atom] != l.positive for l in obs)


def monitored_atoms(g: GroundedDescription, action: Atom) -> set[Atom]:
    """What a plain executor checks: the action's effects and the preconditions on its object."""
    aid = g.action_id(action)
    out = {g.atoms[law.head] for law in g.causal[aid]}
    own = set(action.args[1:])
    for pos, neg in g.executability[aid]:
        m = pos | neg
        i = 0
        while m:
            if m & 1 and own & set(g.atoms[i].args):
                out.add(g.atoms[i])
            m >>= 1
            i += 1
    return out


class CoarseActuator:
    """Coarse actions go straight to a coarse world."""

    def __init__(self, g: GroundedDescription, exe: Executor):
        self.g = g
        self.exe = exe
        self.actions = 0
        self.fine_time = 0.0
        self.fine_plans = 0

    def perform(self, action: Atom, t: Transition, goal: Goal, belief: State) -> Outcome:
        res = self.exe.run(action)
        self.actions += 1
        expected = expected_effects(self.g, belief, action)
        return Outcome(not contradicted(expected, res.obs), res.obs)

    def look(self) -> tuple[Literal, ...]:
        return self.exe.look()


# ---------------------------------------------------------------------------
# fine resolution


@dataclass
class FineBelief:
    """The robot's fine-resolution picture: its cell, object cells and what it holds.

    An object's cell is only trusted (and reported to the coarse history) once
    test readings have confirmed it; until then it is a placeholder in the
    object's believed room.
    """

    spec: RefinementSpec
    robot: str
    cell: dict[str, str | None]
    held: str | None = None
    evidence: dict[tuple[str, str], int] = field(default_factory=dict)
    confirmed: set[str] = field(default_factory=set)
    missing: set[tuple[str, str]] = field(default_factory=set)  # (object, room) searched in vain

    def room(self, cell: str | None) -> str | None:
        return None if cell is None else self.spec.component_map[cell]

    def part_object(self, part: str) -> str:
        return self.spec.component_map[part]

    @property
    def carried(self) -> str | None:
        return self.part_object(self.held) if self.held else None

    def atoms(self) -> list[Atom]:
        out = [Atom("loc*", (self.robot, self.cell[self.robot]))]
        for thing, c in self.cell.items():
            if thing == self.robot or thing == self.carried or c is None:
                continue
            out.append(Atom("loc*", (thing, c)))
        if self.held:
            out.append(Atom("in_hand*", (self.robot, self.held)))
        return out

    def place(self, thing: str, cell: str, score: int = 2) -> None:
        for key in [k for k in self.evidence if k[0] == thing]:
            del self.evidence[key]
        self.evidence[(thing, cell)] = score
        self.cell[thing] = cell
        self.confirmed.add(thing)

    def candidates(self, thing: str, cells: Iterable[str]) -> list[str]:
        """Cells worth checking for ``thing``: positive evidence first, then unexplored ones."""
        scored = [(-self.evidence.get((thing, c), 0), c) for c in cells if self.evidence.get((thing, c), 0) > -2]
        return [c for _, c in sorted(scored)]


class FineActuator:
    """Carries out coarse actions by fine-resolution planning and execution."""

    def __init__(self, coarse: SystemDescription, cg: GroundedDescription, fine: SystemDescription,
                 spec: RefinementSpec, exe: Executor, belief: FineBelief, config: ControllerConfig):
        self.coarse = coarse
        self.cg = cg
        self.fine = fine
        self.spec = spec
        self.exe = exe
        self.belief = belief
        self.config = config
        self.actions = 0
        self.fine_time = 0.0
        self.fine_plans = 0
        self._full: GroundedDescription | None = None
        self._rooms: dict[str, str] = {}  # believed coarse room of each object
        self._watch: set[str] = set()

    def _description(self, t: Transition, goal: Goal) -> tuple[GroundedDescription, frozenset[str] | None]:
        if not self.config.zooming:
            if self._full is None:
                try:
                    self._full = ground(self.fine)
                except GroundingBudgetExceeded as err:
                    raise _Abort(f"grounding budget: {err}") from err
            return self._full, None
        relcon = relevant_constants(t, goal, self.cg)
        z = zoom(self.fine, t, goal, relcon, self.cg, self.spec)
        return z.grounded, z.retained

    def _sync(self, belief: State) -> None:
        """Objects without a confirmed cell sit in the first cell of their believed room."""
        b = self.belief
        self._rooms = {}
        for atom in self.cg.true_atoms(belief):
            if atom.name != "loc" or atom.args[0] == b.robot:
                continue
            thing, room = atom.args
            self._rooms[thing] = room
            cur = b.cell.get(thing)
            if cur is None or b.room(cur) != room:
                b.confirmed.discard(thing)
                b.cell[thing] = self.spec.components(room)[0]

    def _confirm(self, atom: Atom, first: bool | None) -> bool:
        """Read until one answer leads by three (the first reading may come with the action)."""
        lead = 0 if first is None else (1 if first else -1)
        reads = 0 if first is None else 1
        while abs(lead) < 3 and reads < 9:
            lead += 1 if self.exe.test(atom) else -1
            reads += 1
        return lead > 0

    def _certain(self, atom: Atom) -> bool:
        """Three positive readings in a row; used before believing something unexpected."""
        return all(self.exe.test(atom) for _ in range(3))

    def _look_for(self, obs: Iterable[Literal]) -> bool:
        """Fold sightings of the watched objects into the belief; True when a believed cell changed."""
        b = self.belief
        here = b.room(b.cell[b.robot])
        seen: dict[str, dict[str, bool]] = {}
        for lit in obs:
            if lit.atom.name != "loc*":
                continue
            thing, c = lit.atom.args
            if thing == b.robot or thing == b.carried:
                continue
            key = (thing, c)
            b.evidence[key] = max(-3, min(3, b.evidence.get(key, 0) + (1 if lit.positive else -1)))
            seen.setdefault(thing, {})[c] = lit.positive
        changed = False
        for thing in sorted(self._watch & set(seen)):
            if thing == b.carried:
                continue
            cur = b.cell.get(thing)
            if thing in b.confirmed:
                if cur in seen[thing] and b.evidence[(thing, cur)] < 0:
                    atom = Atom("loc*", (thing, cur))
                    if not self._confirm(atom, False):
                        b.confirmed.discard(thing)
                        b.evidence[(thing, cur)] = -3
                        changed = True
                continue
            room = self._rooms.get(thing)
            for c in b.candidates(thing, [c for c in seen[thing] if seen[thing][c]]):
                atom = Atom("loc*", (thing, c))
                ok = self._confirm(atom, True) if b.room(c) == room else self._certain(atom)
                if ok:
                    changed |= cur != c
                    b.place(thing, c)
                    break
                b.evidence[(thing, c)] = -3
            if thing not in b.confirmed and room == here:
                # the whole room is in view: is there any cell left where it could be?
                left = [c for c in self.spec.components(room) if b.evidence.get((thing, c), 0) > -2]
                if not left:
                    # double-check every cell before giving up on the room
                    for c in self.spec.components(room):
                        if self._confirm(Atom("loc*", (thing, c)), None):
                            b.place(thing, c)
                            break
                    else:
                        b.missing.add((thing, room))
                    changed = True
                elif cur not in left:
                    b.cell[thing] = left[0]
                    changed = True
        return changed

    def _localize(self, obs: Iterable[Literal]) -> bool:
        """Re-locate the robot when its own cell is read as wrong; True when the belief changed."""
        b = self.belief
        mine = {l.atom.args[1]: l.positive for l in obs if l.atom.name == "loc*" and l.atom.args[0] == b.robot}
        here = b.cell[b.robot]
        if mine.get(here, True) or self._confirm(Atom("loc*", (b.robot, here)), False):
            return False
        for c in sorted(mine, key=lambda c: (not mine[c], c)):
            if c != here and self._confirm(Atom("loc*", (b.robot, c)), mine[c]):
                b.cell[b.robot] = c
                return True
        return False

    def _apply(self, action: Atom, res: ExecResult) -> bool:
        """Update the belief after a fine action; True when the action took effect."""
        b = self.belief
        reading = {l.atom: l.positive for l in res.obs}
        if action.name == "move*":
            target = Atom("loc*", (b.robot, action.args[1]))
            if self._confirm(target, reading.get(target)):
                b.cell[b.robot] = action.args[1]
                return True
            return False
        if action.name in ("pickup*", "putdown*"):
            part = action.args[1]
            obj = b.part_object(part)
            atom = Atom("in_hand*", (b.robot, part))
            held = self._confirm(atom, reading.get(atom))
            if action.name == "pickup*" and held:
                b.held = part
                b.place(obj, b.cell[b.robot])
                return True
            if action.name == "putdown*" and not held:
                b.held = None
                b.place(obj, b.cell[b.robot])
                return True
            if action.name == "pickup*" and not self._confirm(Atom("loc*", (obj, b.cell[b.robot])), None):
                b.confirmed.discard(obj)
                b.evidence[(obj, b.cell[b.robot])] = -3
            return False
        return res.verdict == SUCCESS

    def _plan(self, zg: GroundedDescription, goal: Goal) -> Plan | None:
        init = fine_state(zg, self.belief.atoms())
        if not isinstance(init, int):
            raise _Abort("fine belief is inconsistent")
        if goal.holds(zg, init):
            return Plan(())
        t0 = time.perf_counter()
        try:
            plan = plan_minimal(zg, init, goal, self.config.fine_horizon, timeout=self.config.fine_timeout)
        except PlanningTimeout as err:
            raise _Abort(f"fine-plan timeout after {err.elapsed:.1f}s") from err
        finally:
            self.fine_time += time.perf_counter() - t0
        self.fine_plans += 1
        return plan if isinstance(plan, Plan) else None

    def perform(self, action: Atom, t: Transition, goal: Goal, belief: State) -> Outcome:
        t0 = time.perf_counter()
        zg, keep = self._description(t, goal)
        self._sync(belief)
        self._watch = {c for c in action.args[1:] if c in self._rooms}
        self._watch |= {c for l in goal.literals for c in l.atom.args if c in self._rooms}
        fgoal = fine_goal(zg, self.coarse.signature, t.after, self.cg)
        self.fine_time += time.perf_counter() - t0
        steps = 0
        reached = False
        self.belief.missing.clear()
        while steps < self.config.max_fine_steps and not self.belief.missing:
            plan = self._plan(zg, fgoal)
            if plan is None:
                break
            if not plan.actions:
                reached = True
                break
            self.exe.world.log("plan", f"level=fine actions={plan}")
            for fa in plan.actions:
                res = self.exe.run(fa)
                self.actions += 1
                steps += 1
                took = self._apply(fa, res)
                moved = self._localize(res.obs)
                moved |= self._look_for(res.obs)
                if not took or moved or steps >= self.config.max_fine_steps:
                    break
        lifted = self._lifted()
        # the verdict is about the action's own effects, not the rest of the fine goal
        done = set(lifted)
        ok = reached or all(l in done for l in expected_effects(self.cg, belief, action))
        return Outcome(ok, tuple(lifted))

    def _lifted(self) -> list[Literal]:
        """What the fine belief says at coarse resolution."""
        b = self.belief
        here = b.room(b.cell[b.robot])
        out = [Literal(Atom("loc*", (b.robot, b.cell[b.robot])))]
        if b.held:
            out.append(Literal(Atom("in_hand*", (b.robot, b.held))))
        for thing in sorted(b.confirmed & self._watch):
            c = b.cell[thing]
            if thing != b.carried and b.room(c) == here:
                out.append(Literal(Atom("loc*", (thing, c))))
        lits = [Literal(o.fluent, o.value) for o in lift_observations(out, self.spec, self.coarse.signature)]
        lits += [Literal(Atom("loc", (thing, room)), False) for thing, room in sorted(b.missing)]
        # the robot knows which room it is in, and so where it is not
        lits += [Literal(Atom("loc", (b.robot, p)), False) for p in self.coarse.signature.members("place") if p != here]
        if not b.held:
            lits += [Literal(Atom("in_hand", (b.robot, o)), False) for o in self.coarse.signature.members("object")]
        return lits

    def look(self) -> tuple[Literal, ...]:
        return ()


# ---------------------------------------------------------------------------
# the loops


def _relevant(obs: Iterable[Literal], consts: set[str], effects: set[Atom]) -> list[Literal]:
    return [l for l in obs if l.atom in effects or set(l.atom.args) <= consts]


def _record_obs(history: History, obs: Iterable[Literal], g: GroundedDescription) -> None:
    seen = set()
    for l in obs:
        if l.atom in g.atom_index and l.atom not in seen:
            seen.add(l.atom)
            history.observe(l.atom, l.positive)


def _mental(history: History, world: WorldState, verb: str, activity: int) -> None:
    """Mental actions take a history step of their own but no time."""
    history.add(Hpd(Atom(verb, (str(activity),)), history.current_step))
    history.advance()
    world.log("mental", f"action={verb}({activity})")


def run_ati(g: GroundedDescription, trial: Trial, actuator, world: WorldState, config: ControllerConfig) -> RunRecord:
    history = History()
    for lit in trial.beliefs:
        history.observe(lit.atom, lit.positive, 0)
    goal = trial.goal
    mental = select(MentalState(), goal)
    plans = 0
    planning = 0.0
    attempts = 0
    reason = "budget"
    believed = False
    lengths: list[int] = []
    while attempts < config.max_steps:
        t0 = time.perf_counter()
        model = cautious_model(g, history, goal, config.max_exogenous)
        if isinstance(model, NoModel):
            planning += time.perf_counter() - t0
            reason = "no model"
            world.log("diag", f"result=none {model.diagnostic}")
            break
        choice = next_intended_action(mental, model, g)
        planning += time.perf_counter() - t0
        if isinstance(choice, Done):
            believed = True
            reason = "done"
            world.log("done", "believed=true")
            break
        if isinstance(choice, Stop):
            mental = stop(mental)
            _mental(history, world, "stop", choice.name)
            continue
        if isinstance(choice, Replan):
            t0 = time.perf_counter()
            plan = plan_minimal(g, model.final, goal, config.max_horizon)
            planning += time.perf_counter() - t0
            plans += 1
            if not isinstance(plan, Plan):
                reason = "unsat"
                world.log("plan", "result=unsat")
                break
            world.log("plan", f"level=coarse actions={plan}")
            lengths.append(len(plan))
            activity, mental = create_activity(mental, goal, plan, g, model.final)
            mental = start(mental, activity)
            _mental(history, world, "start", activity.name)
            if plan.actions:
                a = plan.actions[0]
                after = successor(model.final, g.action_id(a), g)
                consts = relevant_constants(Transition(model.final, a, after), goal, g)
                _record_obs(history, _relevant(actuator.look(), consts, set()), g)
            continue
        a = choice.action
        after = successor(model.final, g.action_id(a), g)
        t = Transition(model.final, a, after if isinstance(after, int) else model.final)
        consts = relevant_constants(t, goal, g)
        effects = {l.atom for l in expected_effects(g, model.final, a)}
        step = history.current_step
        history.add(Attempt(a, step))
        attempts += 1
        try:
            out = actuator.perform(a, t, goal, model.final)
        except _Abort as err:
            reason = err.reason
            world.log("abort", f"reason={err.reason}")
            break
        verdict = Hpd(a, step) if out.ok else NotHpd(a, step)
        history.add(verdict)
        history.advance()
        _record_obs(history, _relevant(out.obs, consts, effects), g)
        mental = advance(mental, verdict)
    return _record(world, trial, history, believed, plans, lengths, planning, actuator, reason)


def run_tp(g: GroundedDescription, trial: Trial, actuator, world: WorldState, config: ControllerConfig) -> RunRecord:
    history = History()
    for lit in trial.beliefs:
        history.observe(lit.atom, lit.positive, 0)
    goal = trial.goal
    plans = 0
    planning = 0.0
    attempts = 0
    reason = "budget"
    believed = False
    lengths: list[int] = []
    plan: Plan | None = None
    index = 0
    model: ModelOfHistory | None = None
    while attempts < config.max_steps:
        if plan is None:
            t0 = time.perf_counter()
            found = consistent_model(g, history, config.max_exogenous)
            if isinstance(found, NoModel):
                planning += time.perf_counter() - t0
                reason = "no model"
                break
            model = found
            result = plan_minimal(g, model.final, goal, config.max_horizon)
            planning += time.perf_counter() - t0
            plans += 1
            if not isinstance(result, Plan):
                reason = "unsat"
                world.log("plan", "result=unsat")
                break
            world.log("plan", f"level=coarse actions={result}")
            lengths.append(len(result))
            plan, index, belief = result, 0, model.final
        if index >= len(plan.actions):
            believed = goal.holds(g, belief)
            reason = "plan exhausted"
            world.log("done", f"believed={'true' if believed else 'false'}")
            break
        a = plan.actions[index]
        watch = monitored_atoms(g, a)
        after = successor(belief, g.action_id(a), g)
        t = Transition(belief, a, after if isinstance(after, int) else belief)
        step = history.current_step
        history.add(Attempt(a, step))
        attempts += 1
        out = actuator.perform(a, t, goal, belief)
        seen = [l for l in out.obs if l.atom in watch]
        ok = out.ok and not contradicted(expected_effects(g, belief, a), seen)
        history.add(Hpd(a, step) if ok else NotHpd(a, step))
        history.advance()
        _record_obs(history, seen, g)
        if ok and isinstance(after, int):
            belief = after
            index += 1
        else:
            plan = None
    return _record(world, trial, history, believed, plans, lengths, planning, actuator, reason)


def _record(world: WorldState, trial: Trial, history: History, believed: bool, plans: int, lengths: list[int],
            planning: float, actuator, reason: str) -> RunRecord:
    achieved = _goal_in_truth(world, trial.goal)
    world.log("end", f"reason={reason.split(':')[0].replace(' ', '-')} achieved={'true' if achieved else 'false'}")
    return RunRecord(
        goal_achieved=achieved,
        believed_achieved=believed,
        plans_computed=plans,
        planning_time=planning,
        execution_time=world.clock,
        actions_executed=actuator.actions,
        trace=tuple(world.trace),
        reason=reason,
        coarse_time=planning,
        fine_time=actuator.fine_time,
        fine_plans=actuator.fine_plans,
        history=history.to_log(),
        plan_lengths=tuple(lengths),
    )


def _goal_in_truth(world: WorldState, goal: Goal) -> bool:
    g = world.g
    for lit in goal.literals:
        aid = g.atom_index.get(lit.atom)
        if aid is None or bool(world.truth >> aid & 1) != lit.positive:
            return False
    return True


# ---------------------------------------------------------------------------
# entry points


def run_goal(g: GroundedDescription, trial: Trial, config: ControllerConfig) -> RunRecord:
    """One coarse-resolution run (the world is simulated at the same resolution)."""
    world = WorldState.create(g, trial.truth, f"{config.seed}:{trial.label}")
    exe = Executor(world, config.action_model, trial.script, room_scope(ROBOT))
    inject(trial.script, world)
    actuator = CoarseActuator(g, exe)
    if config.mode == "ATI":
        return run_ati(g, trial, actuator, world, config)
    return run_tp(g, trial, actuator, world, config)


def run_paired(g: GroundedDescription, trial: Trial, configs: tuple[ControllerConfig, ControllerConfig]) -> tuple[RunRecord, RunRecord]:
    """Both runs start from the same world, script and seed."""
    a, b = configs
    if a.seed != b.seed:
        raise ValueError("paired runs must share a seed")
    return run_goal(g, trial, a), run_goal(g, trial, b)


def world_description(fine: SystemDescription) -> GroundedDescription:
    return ground(fine, budget=10 ** 12)


@dataclass(frozen=True)
class FineSetup:
    coarse: SystemDescription
    fine: SystemDescription
    spec: RefinementSpec
    cg: GroundedDescription
    tg: GroundedDescription  # the world's complete fine description


def run_fine(setup: FineSetup, trial: Trial, robot_cell: str, config: ControllerConfig) -> RunRecord:
    """ATI at coarse resolution with every action refined (zoomed or not) into fine actions."""
    # noise depends on the seed only, so equal tasks on different levels see comparable luck
    world = WorldState.create(setup.tg, trial.truth, f"{config.seed}:fine")
    exe = Executor(world, config.action_model, trial.script, fine_scope)
    belief = FineBelief(setup.spec, ROBOT, {ROBOT: robot_cell})
    actuator = FineActuator(setup.coarse, setup.cg, setup.fine, setup.spec, exe, belief, config)
    return run_ati(setup.cg, trial, actuator, world, replace(config, mode="ATI"))
