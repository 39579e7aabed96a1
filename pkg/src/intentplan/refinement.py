"""Fine-resolution refinement, goal-aware zooming and lifting of fine outcomes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .dsl import (
    FINE_UNIVERSE,
    UNIVERSE,
    Atom,
    Axiom,
    Comparison,
    Default,
    Diagnostic,
    DomainError,
    Literal,
    Refines,
    RefinementBlock,
    Signature,
    SystemDescription,
    TestDecl,
    check_axiom,
    is_var,
)
from .grounding import GroundedDescription, ground
from .history import Obs
from .planning import Goal
from .semantics import Inconsistent, State, complete_state

log = logging.getLogger(__name__)

COMPONENT = "component"


class RefinementError(ValueError):
    pass


@dataclass(frozen=True)
class RefinementSpec:
    magnified_sorts: dict[str, str]  # coarse sort -> fine counterpart
    fine_members: dict[str, tuple[str, ...]]
    component_map: dict[str, str]  # fine constant -> coarse parent
    refined: tuple[Refines, ...] = ()
    tests: tuple[TestDecl, ...] = ()
    axioms: tuple[Axiom, ...] = ()
    observability: dict[str, str] = field(default_factory=dict)  # fluent -> direct | indirect

    @classmethod
    def from_block(cls, block: RefinementBlock | None, coarse: Signature) -> RefinementSpec:
        block = block or RefinementBlock()
        consts = coarse.constants()
        magnified: dict[str, str] = {}
        members: dict[str, tuple[str, ...]] = {}
        cmap: dict[str, str] = {}
        for fine_sort, pairs in block.fine_sorts.items():
            base = fine_sort.rstrip("*")
            if base not in coarse.sort_members:
                raise RefinementError(f"{fine_sort} refines undeclared sort {base!r}")
            magnified[base] = fine_sort
            members[fine_sort] = tuple(f for f, _ in pairs)
            for fine, parent in pairs:
                if parent not in consts:
                    raise RefinementError(f"undeclared coarse constant {parent!r} in {fine_sort}")
                if parent not in coarse.members(base):
                    raise RefinementError(f"{parent!r} is not of sort {base!r}")
                if fine in cmap or fine in consts:
                    raise RefinementError(f"fine constant {fine!r} declared twice")
                cmap[fine] = parent
            missing = [c for c in coarse.members(base) if c not in cmap.values()]
            if missing:
                raise RefinementError(f"{', '.join(missing)} of sort {base!r} have no components")
        obs: dict[str, str] = {}
        refined_of = {r.name: r.coarse for r in block.attributes}
        for t in block.tests:
            obs[t.fluent.name] = "direct"
            if t.fluent.name in refined_of:
                obs[refined_of[t.fluent.name]] = "indirect"
        return cls(magnified, members, cmap, tuple(block.attributes), tuple(block.tests), tuple(block.axioms), obs)

    def components(self, coarse_const: str) -> tuple[str, ...]:
        return tuple(f for f, c in self.component_map.items() if c == coarse_const)

    def coarse_name(self, fine_name: str) -> str | None:
        for r in self.refined:
            if r.name == fine_name:
                return r.coarse
        return None

    @property
    def testable(self) -> dict[str, TestDecl]:
        return {t.fluent.name: t for t in self.tests}


def spec_of(desc: SystemDescription) -> RefinementSpec:
    return RefinementSpec.from_block(desc.refinement, desc.signature)


# ---------------------------------------------------------------------------
# refinement


def _fact(name: str, *args: str) -> Axiom:
    return Axiom("constraint", Literal(Atom(name, args)), None, ())


def _mentions(ax: Axiom | Default, names: set[str]) -> bool:
    if isinstance(ax, Axiom) and ax.action is not None and ax.action.name in names:
        return True
    if ax.head is not None and ax.head.atom.name in names:
        return True
    return any(isinstance(it, Literal) and it.atom.name in names for it in ax.body)


def _bridge(head: str, head_sorts: Sequence[str], body: str, body_sorts: Sequence[str]) -> tuple[Atom, Atom, list[Literal]]:
    """Head/body atoms over shared variables plus component links for magnified positions."""
    hargs, bargs, links = [], [], []
    for i, (hs, bs) in enumerate(zip(head_sorts, body_sorts), start=1):
        hargs.append(f"X{i}")
        if hs == bs:
            bargs.append(f"X{i}")
        else:
            bargs.append(f"Y{i}")
            links.append(Literal(Atom(COMPONENT, (f"Y{i}", f"X{i}"))))
    return Atom(head, tuple(hargs)), Atom(body, tuple(bargs)), links


def refine(coarse: SystemDescription, spec: RefinementSpec | None = None) -> SystemDescription:
    """Build the fine-resolution description: counterparts, bridges and test machinery."""
    spec = spec or spec_of(coarse)
    csig = coarse.signature
    sig = Signature(
        sort_members=dict(csig.sort_members),
        sort_parent=dict(csig.sort_parent),
        statics=dict(csig.statics),
        basic_fluents=dict(csig.basic_fluents),
        defined_fluents=dict(csig.defined_fluents),
        actions=dict(csig.actions),
    )
    exo = set(csig.exogenous)
    for fine_sort, members in spec.fine_members.items():
        sig.sort_members[fine_sort] = members
        sig.sort_parent[fine_sort] = FINE_UNIVERSE
    axioms: list[Axiom] = []
    if spec.component_map:
        sig.statics[COMPONENT] = (FINE_UNIVERSE, UNIVERSE)

    dropped_actions: set[str] = set()
    bridges: list[Axiom] = []
    for r in spec.refined:
        kind = csig.kind_of(r.coarse)
        if kind is None:
            raise RefinementError(f"{r.name} refines undeclared {r.coarse!r}")
        csorts = csig.attribute(r.coarse) if kind != "action" else csig.actions[r.coarse]
        if len(csorts) != len(r.arg_sorts):
            raise RefinementError(f"{r.name} and {r.coarse} differ in arity")
        if kind == "action":
            sig.actions[r.name] = r.arg_sorts
            del sig.actions[r.coarse]
            dropped_actions.add(r.coarse)
            if r.coarse in exo:
                exo.discard(r.coarse)
                exo.add(r.name)
        elif kind == "static":
            sig.statics[r.name] = r.arg_sorts
        else:
            sig.basic_fluents[r.name] = r.arg_sorts
            if kind == "basic":
                del sig.basic_fluents[r.coarse]
                sig.defined_fluents[r.coarse] = csorts
            head, body, links = _bridge(r.coarse, csorts, r.name, r.arg_sorts)
            bridges.append(Axiom("constraint", Literal(head), None, (Literal(body), *links)))

    # coarse actions whose effects now concern derived attributes have no fine meaning
    for ax in coarse.axioms:
        if ax.kind == "causal" and ax.head.atom.name in sig.defined_fluents:
            dropped_actions.add(ax.action.name)
    for name in dropped_actions:
        sig.actions.pop(name, None)
        exo.discard(name)
    axioms.extend(ax for ax in coarse.axioms if not _mentions(ax, dropped_actions))
    axioms.extend(bridges)
    for fine, parent in spec.component_map.items():
        axioms.append(_fact(COMPONENT, fine, parent))
    axioms.extend(spec.axioms)

    agent_sort = _agent_sort(sig, exo)
    for t in spec.tests:
        axioms.extend(_test_machinery(sig, spec, t, agent_sort))
    sig.exogenous = frozenset(exo)

    defaults = [d for d in coarse.defaults if d.head.atom.name in sig.basic_fluents]
    fine = SystemDescription(sig, axioms, defaults, None)
    _check(fine)
    log.debug("refined: %d sorts, %d axioms", len(sig.sort_members), len(axioms))
    return fine


def _agent_sort(sig: Signature, exo: set[str]) -> str | None:
    for name, sorts in sig.actions.items():
        if name not in exo and sorts:
            return sorts[0]
    return None


def _test_machinery(sig: Signature, spec: RefinementSpec, t: TestDecl, agent_sort: str | None) -> list[Axiom]:
    name = t.fluent.name
    sorts = sig.attribute(name)
    if sorts is None or agent_sort is None:
        raise RefinementError(f"cannot test {name!r}")
    fluent = t.fluent
    agent = t.agent
    args = (agent, *fluent.args)
    arg_sorts = (agent_sort, *sorts)
    test, obs_pos, obs_neg, can = f"test_{name}", f"observed_{name}", f"observed_not_{name}", f"can_test_{name}"
    sig.actions[test] = arg_sorts
    sig.basic_fluents[obs_pos] = arg_sorts
    sig.basic_fluents[obs_neg] = arg_sorts
    sig.defined_fluents[can] = arg_sorts
    act = Atom(test, args)
    out = [
        Axiom("constraint", Literal(Atom(can, args)), None, tuple(t.body)),
        Axiom("causal", Literal(Atom(obs_pos, args)), act, (Literal(fluent),)),
        Axiom("causal", Literal(Atom(obs_neg, args)), act, (Literal(fluent, False),)),
        Axiom("exec", None, act, (Literal(Atom(can, args), False),)),
    ]
    coarse = spec.coarse_name(name)
    if coarse is not None:
        csorts = sig.attribute(coarse)
        indirect = f"observed_{coarse}"
        sig.defined_fluents[indirect] = (agent_sort, *csorts)
        head, body, links = _bridge(indirect, (agent_sort, *csorts), obs_pos, arg_sorts)
        out.append(Axiom("constraint", Literal(head), None, (Literal(body), *links)))
    return out


def _check(desc: SystemDescription) -> None:
    diags = []
    for ax in desc.axioms:
        for msg in check_axiom(desc.signature, ax):
            diags.append(Diagnostic(ax.line, 1, f"{msg} in {ax}", "<refinement>"))
    if diags:
        raise DomainError(diags)


# ---------------------------------------------------------------------------
# relevance and zooming


@dataclass(frozen=True)
class Transition:
    before: State
    action: Atom
    after: State


def _goal_constants(goal: Goal) -> set[str]:
    return {a for lit in goal.literals for a in lit.atom.args}


def relevant_constants(t: Transition, goal: Goal | None, g: GroundedDescription) -> set[str]:
    """Object constants relevant to a coarse transition or the overall goal.

    Terms are read as true atoms: an executability body contributes the
    constants of its positive literals that hold before the action.
    """
    out = set(t.action.args)
    if goal is not None:
        out |= _goal_constants(goal)
    diff = (t.before ^ t.after) & ~g.static_mask
    for i, atom in enumerate(g.atoms):
        if diff >> i & 1:
            out.update(atom.args)
    sig = g.desc.signature
    for idx, ax in enumerate(g.desc.axioms):
        if ax.kind != "exec" or ax.action.name != t.action.name:
            continue
        for inst in g.ground_axioms.instances(idx):
            if inst.action != t.action or not _statics_hold(g, inst):
                continue
            for it in inst.body:
                if isinstance(it, Literal) and it.positive and sig.kind_of(it.atom.name) != "sort":
                    aid = g.atom_index.get(it.atom)
                    if aid is not None and t.before >> aid & 1:
                        out.update(it.atom.args)
    return out


def _statics_hold(g: GroundedDescription, inst: Axiom) -> bool:
    sig = g.desc.signature
    for it in inst.body:
        if isinstance(it, Comparison):
            if (it.left == it.right) != (it.op == "="):
                return False
        elif sig.kind_of(it.atom.name) == "static":
            if bool(g.static_state >> g.atom_index[it.atom] & 1) != it.positive:
                return False
        elif sig.kind_of(it.atom.name) == "sort":
            if it.atom.args[0] not in sig.members(it.atom.name):
                return False
    return True


@dataclass
class ZoomedDescription:
    desc: SystemDescription
    transition: Transition
    goal: Goal | None
    relcon: frozenset[str]
    retained: frozenset[str]

    @cached_property
    def grounded(self) -> GroundedDescription:
        return ground(self.desc)


def _location_of(g: GroundedDescription, s: State, thing: str) -> set[str]:
    """Value constants of true atoms whose leading arguments are exactly ``thing``."""
    out = set()
    for i, atom in enumerate(g.atoms):
        if g.kind[i] != "static" and s >> i & 1 and len(atom.args) == 2 and atom.args[0] == thing:
            out.add(atom.args[1])
    return out


def zoom_constants(
    t: Transition, goal: Goal | None, g: GroundedDescription, spec: RefinementSpec, relcon: Iterable[str],
) -> frozenset[str]:
    """Constants kept by zooming: coarse ones first, then the fine components.

    Fine components come from the transition's own relevant constants plus the
    current location of every object named in the goal. Goal-only values (a
    destination the transition does not touch) stay out.
    """
    own = relevant_constants(t, None, g)
    magnified_parents = set(spec.component_map.values())
    leading: set[str] = set()
    values: set[str] = set()
    for lit in goal.literals if goal is not None else ():
        if lit.atom.args:
            leading.update(lit.atom.args[:-1])
            values.add(lit.atom.args[-1])
    for a in leading:
        own |= {p for p in _location_of(g, t.before, a) if p in magnified_parents}
    goal_only = (values - leading - own) & magnified_parents
    keep = (set(relcon) - goal_only) | own
    keep |= {f for f, c in spec.component_map.items() if c in own}
    return frozenset(keep)


def zoom(
    fine: SystemDescription,
    t: Transition,
    goal: Goal | None,
    relcon: Iterable[str],
    g: GroundedDescription,
    spec: RefinementSpec,
) -> ZoomedDescription:
    """Restrict the fine description to the constants relevant to ``t`` and ``goal``."""
    relcon = frozenset(relcon)
    keep = zoom_constants(t, goal, g, spec, relcon)
    return ZoomedDescription(restrict(fine, keep), t, goal, relcon, keep)


def restrict(desc: SystemDescription, keep: Iterable[str]) -> SystemDescription:
    """The description over the given constants only."""
    keep = set(keep)
    src = desc.signature
    sig = Signature(sort_parent=dict(src.sort_parent))
    for sort, members in src.sort_members.items():
        sig.sort_members[sort] = tuple(m for m in members if m in keep)
    for sort in list(sig.sort_members):
        if not sig.members(sort):
            del sig.sort_members[sort]
    sig.sort_parent = {s: p for s, p in sig.sort_parent.items() if s in sig.sort_members}

    def alive(sorts: tuple[str, ...]) -> bool:
        return all(sig.has_sort(s) and sig.members(s) for s in sorts)

    for src_table, dst_table in ((src.statics, sig.statics), (src.basic_fluents, sig.basic_fluents),
                                 (src.defined_fluents, sig.defined_fluents), (src.actions, sig.actions)):
        for name, sorts in src_table.items():
            if alive(sorts):
                dst_table[name] = sorts
    sig.exogenous = frozenset(a for a in src.exogenous if a in sig.actions)

    def expressible(ax: Axiom | Default) -> bool:
        items: list[Atom] = []
        if isinstance(ax, Axiom) and ax.action is not None:
            items.append(ax.action)
        if ax.head is not None:
            items.append(ax.head.atom)
        items.extend(it.atom for it in ax.body if isinstance(it, Literal))
        for atom in items:
            if sig.kind_of(atom.name) is None:
                return False
            if any(not is_var(a) and a not in keep for a in atom.args):
                return False
        for it in ax.body:
            if isinstance(it, Comparison) and any(not is_var(x) and x not in keep for x in (it.left, it.right)):
                return False
        return True

    axioms = [ax for ax in desc.axioms if expressible(ax)]
    defaults = [d for d in desc.defaults if expressible(d)]
    return SystemDescription(sig, axioms, defaults, None)


# ---------------------------------------------------------------------------
# goals, states and lifting


def fine_goal(zg: GroundedDescription, coarse: Signature, after: State, cg: GroundedDescription) -> Goal:
    """The coarse outcome of a transition, restricted to what the zoomed description can express."""
    lits = []
    for atom in zg.atoms:
        if atom.name not in coarse.basic_fluents and atom.name not in coarse.defined_fluents:
            continue
        cid = cg.atom_index.get(atom)
        if cid is None:
            continue
        lits.append(Literal(atom, bool(after >> cid & 1)))
    return Goal(tuple(lits))


def fine_state(zg: GroundedDescription, true_atoms: Iterable[Atom]) -> State | Inconsistent:
    """Complete a set of true basic atoms (unknown ones dropped) into a zoomed state."""
    partial = {}
    for atom in true_atoms:
        aid = zg.atom_index.get(atom)
        if aid is not None and zg.kind[aid] == "basic":
            partial[aid] = True
    return complete_state(partial, zg)


def lift_literal(lit: Literal, spec: RefinementSpec, coarse: Signature) -> Literal | None:
    name = spec.coarse_name(lit.atom.name)
    if name is None:
        if coarse.kind_of(lit.atom.name) in ("basic", "defined"):
            return lit
        return None
    args = []
    magnified = False
    for a in lit.atom.args:
        if a in spec.component_map:
            args.append(spec.component_map[a])
            magnified = True
        elif a in coarse.constants():
            args.append(a)
        else:
            raise RefinementError(f"unmapped fine constant {a!r}")
    if magnified and not lit.positive:
        # one part or cell being empty says nothing about the whole
        return None
    return Literal(Atom(name, tuple(args)), lit.positive)


def lift_observations(outcomes: Iterable[Literal], spec: RefinementSpec, coarse: Signature, step: int = 0) -> list[Obs]:
    """Coarse observation records implied by fine outcomes (duplicates merged)."""
    seen: dict[Atom, bool] = {}
    for lit in outcomes:
        up = lift_literal(lit, spec, coarse)
        if up is None:
            continue
        prev = seen.get(up.atom)
        if prev is not None and prev != up.positive:
            raise RefinementError(f"contradictory outcomes for {up.atom}")
        seen[up.atom] = up.positive
    return [Obs(a, v, step) for a, v in seen.items()]
