"""Grounding: sort-respecting substitution of axiom schemas over declared members."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .dsl import (
    Atom,
    Axiom,
    BodyItem,
    Comparison,
    Default,
    Literal,
    Signature,
    SystemDescription,
    is_var,
    most_specific,
)

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 5_000_000


class GroundingBudgetExceeded(Exception):
    """Raised when a description would ground to more instances than allowed."""

    def __init__(self, count: int, budget: int):
        self.count = count
        self.budget = budget
        super().__init__(f"grounding needs {count} instances, budget is {budget}")


@dataclass(frozen=True)
class Constraint:
    cid: int
    head: int
    value: bool
    pos: int
    neg: int
    atoms: tuple[int, ...]  # body atom ids
    schema: int


@dataclass(frozen=True)
class CausalLaw:
    head: int
    value: bool
    pos: int
    neg: int


@dataclass(frozen=True)
class GroundDefault:
    index: int
    priority: int
    head: int
    value: bool
    pos: int
    neg: int
    atoms: tuple[int, ...]


def _var_sorts(sig: Signature, items: Sequence[Atom | Literal | BodyItem | None], action: Atom | None) -> dict[str, str]:
    table: dict[str, list[str]] = {}

    def visit(atom: Atom, sorts: tuple[str, ...]) -> None:
        for term, sort in zip(atom.args, sorts):
            if is_var(term):
                table.setdefault(term, []).append(sort)

    if action is not None:
        visit(action, sig.actions[action.name])
    for it in items:
        if isinstance(it, Literal):
            a = it.atom
            if sig.kind_of(a.name) == "sort":
                visit(a, (a.name,))
            else:
                visit(a, sig.attribute(a.name) or ())
    out: dict[str, str] = {}
    for var, sorts in table.items():
        best = most_specific(sig, sorts)
        if best is None:
            raise ValueError(f"variable {var} has incompatible sorts {sorts}")
        out[var] = best
    return out


class _Schema:
    """One axiom (or default) prepared for enumeration."""

    def __init__(self, sig: Signature, head: Literal | None, action: Atom | None, body: Sequence[BodyItem]):
        self.head = head
        self.action = action
        self.body = tuple(body)
        lits = [head, *body]
        self.var_sort = _var_sorts(sig, lits, action)
        self.vars = list(self.var_sort)
        self.domains = {v: sig.members(s) for v, s in self.var_sort.items()}
        self.count = math.prod(len(d) for d in self.domains.values())

    def order(self, sig: Signature) -> tuple[list[str], list[list[BodyItem]]]:
        """Greedy binding order so static checks fire as early as possible."""
        checks = [it for it in self.body if isinstance(it, Comparison) or sig.kind_of(it.atom.name) in ("static", "sort")]

        def vars_of(it: BodyItem) -> set[str]:
            terms = (it.left, it.right) if isinstance(it, Comparison) else it.atom.args
            return {t for t in terms if is_var(t)}

        remaining = list(self.vars)
        bound: set[str] = set()
        order: list[str] = []
        while remaining:
            def score(v: str) -> tuple[int, int]:
                done = sum(1 for c in checks if v in vars_of(c) and vars_of(c) <= bound | {v})
                return (-done, len(self.domains[v]))

            best = min(remaining, key=score)
            remaining.remove(best)
            order.append(best)
            bound.add(best)
        at_level: list[list[BodyItem]] = [[] for _ in order]
        for c in checks:
            vs = vars_of(c)
            level = max((order.index(v) for v in vs), default=-1)
            if level >= 0:  # constant-only checks are handled by ground_checks
                at_level[level].append(c)
        return order, at_level

    def ground_checks(self) -> list[BodyItem]:
        return [it for it in self.body if (isinstance(it, Comparison) and not is_var(it.left) and not is_var(it.right))
                or (isinstance(it, Literal) and not any(is_var(t) for t in it.atom.args))]


def _subst(atom: Atom, env: dict[str, str]) -> Atom:
    if not atom.args:
        return atom
    return Atom(atom.name, tuple(env.get(t, t) for t in atom.args))


class GroundAxiomView:
    """Lazy, complete list of ground instances (one per sort-respecting substitution)."""

    def __init__(self, sig: Signature, axioms: Sequence[Axiom]):
        self._sig = sig
        self._axioms = list(axioms)
        self._schemas = [_Schema(sig, ax.head, ax.action, ax.body) for ax in self._axioms]
        self.counts = [s.count for s in self._schemas]

    def __len__(self) -> int:
        return sum(self.counts)

    def instances(self, index: int) -> Iterator[Axiom]:
        ax, sch = self._axioms[index], self._schemas[index]
        for combo in itertools.product(*(sch.domains[v] for v in sch.vars)):
            env = dict(zip(sch.vars, combo))
            head = Literal(_subst(ax.head.atom, env), ax.head.positive) if ax.head else None
            action = _subst(ax.action, env) if ax.action else None
            body = tuple(
                Comparison(env.get(it.left, it.left), it.op, env.get(it.right, it.right)) if isinstance(it, Comparison)
                else Literal(_subst(it.atom, env), it.positive)
                for it in ax.body
            )
            yield Axiom(ax.kind, head, action, body, ax.line)

    def __iter__(self) -> Iterator[Axiom]:
        for i in range(len(self._axioms)):
            yield from self.instances(i)


@dataclass
class GroundedDescription:
    desc: SystemDescription
    atoms: list[Atom]
    atom_index: dict[Atom, int]
    kind: list[str]
    actions: list[Atom]
    action_index: dict[Atom, int]
    exogenous: list[bool]
    static_state: int
    basic_mask: int
    defined_mask: int
    static_mask: int
    causal: list[list[CausalLaw]]
    executability: list[list[tuple[int, int]]]
    constraints: list[Constraint]
    defaults: list[GroundDefault]
    ground_axioms: GroundAxiomView
    watch: dict[int, list[int]] = field(default_factory=dict)
    by_head: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.basic_ids = [i for i, k in enumerate(self.kind) if k == "basic"]
        self.defined_ids = [i for i, k in enumerate(self.kind) if k == "defined"]
        self.agent_action_ids = [i for i, e in enumerate(self.exogenous) if not e]
        self.exo_action_ids = [i for i, e in enumerate(self.exogenous) if e]
        self.basic_constraints = [c for c in self.constraints if self.kind[c.head] == "basic"]
        self.defined_rules = [c for c in self.constraints if self.kind[c.head] == "defined" and c.value]
        self.defined_integrity = [c for c in self.constraints if self.kind[c.head] == "defined" and not c.value]
        self.mixed = any(self.kind[a] == "defined" for c in self.basic_constraints for a in c.atoms)
        for c in self.basic_constraints:
            self.by_head.setdefault(c.head, []).append(c.cid)
            self.watch.setdefault(c.head, []).append(c.cid)
            for a in c.atoms:
                self.watch.setdefault(a, []).append(c.cid)
        self.defined_watch: dict[int, list[Constraint]] = {}
        for c in self.defined_rules:
            for a in c.atoms:
                self.defined_watch.setdefault(a, []).append(c)
        self.defined_facts = [c for c in self.defined_rules if not c.atoms]

    # -- lookups -------------------------------------------------------
    def atom_id(self, atom: Atom | str) -> int:
        if isinstance(atom, str):
            from .dsl import parse_literal

            atom = parse_literal(atom).atom
        return self.atom_index[atom]

    def action_id(self, action: Atom | str) -> int:
        if isinstance(action, str):
            from .dsl import parse_literal

            action = parse_literal(action).atom
        return self.action_index[action]

    def literal_ids(self, lits: Sequence[Literal]) -> list[tuple[int, bool]]:
        return [(self.atom_index[l.atom], l.positive) for l in lits]

    def holds(self, state: int, atom: Atom | str) -> bool:
        return bool(state >> self.atom_id(atom) & 1)

    def true_atoms(self, state: int, kinds: Sequence[str] = ("basic", "defined")) -> list[Atom]:
        return [a for i, a in enumerate(self.atoms) if state >> i & 1 and self.kind[i] in kinds]

    def describe(self, state: int) -> str:
        return ", ".join(str(a) for a in self.true_atoms(state))


def _static_closure(sig: Signature, axioms: Sequence[Axiom]) -> set[Atom]:
    rules = [ax for ax in axioms if ax.kind == "constraint" and sig.kind_of(ax.head.atom.name) == "static"]
    true: set[Atom] = set()
    changed = True
    while changed:
        changed = False
        for ax in rules:
            if not ax.head.positive:
                continue
            for env in _enumerate(sig, _Schema(sig, ax.head, None, ax.body), true):
                atom = _subst(ax.head.atom, env)
                if atom not in true:
                    true.add(atom)
                    changed = True
    return true


def _check(sig: Signature, it: BodyItem, env: dict[str, str], statics: set[Atom]) -> bool:
    if isinstance(it, Comparison):
        l, r = env.get(it.left, it.left), env.get(it.right, it.right)
        return (l == r) if it.op == "=" else (l != r)
    atom = _subst(it.atom, env)
    if sig.kind_of(atom.name) == "sort":
        return (atom.args[0] in sig.members(atom.name)) == it.positive
    return (atom in statics) == it.positive


def _enumerate(sig: Signature, sch: _Schema, statics: set[Atom]) -> Iterator[dict[str, str]]:
    """Assignments whose static literals and comparisons hold."""
    for it in sch.ground_checks():
        if (isinstance(it, Comparison) or sig.kind_of(it.atom.name) in ("static", "sort")) and not _check(sig, it, {}, statics):
            return
    order, at_level = sch.order(sig)
    env: dict[str, str] = {}
    n = len(order)

    def rec(level: int) -> Iterator[dict[str, str]]:
        if level == n:
            yield env
            return
        var = order[level]
        checks = at_level[level]
        for value in sch.domains[var]:
            env[var] = value
            if all(_check(sig, c, env, statics) for c in checks):
                yield from rec(level + 1)
        env.pop(var, None)

    yield from rec(0)


def ground(desc: SystemDescription, budget: int = DEFAULT_BUDGET) -> GroundedDescription:
    """Ground a validated description into indexed atoms and compiled axioms."""
    sig = desc.signature
    view = GroundAxiomView(sig, desc.axioms)
    atom_list: list[Atom] = []
    kinds: dict[Atom, str] = {}
    for table, kind in ((sig.statics, "static"), (sig.basic_fluents, "basic"), (sig.defined_fluents, "defined")):
        for name, sorts in table.items():
            for args in itertools.product(*(sig.members(s) for s in sorts)):
                atom = Atom(name, tuple(args))
                atom_list.append(atom)
                kinds[atom] = kind
    action_list = [Atom(name, tuple(args)) for name, sorts in sig.actions.items()
                   for args in itertools.product(*(sig.members(s) for s in sorts))]
    total = len(view) + len(atom_list) + len(action_list)
    if total > budget:
        raise GroundingBudgetExceeded(total, budget)

    atom_list.sort(key=lambda a: (a.name, a.args))
    action_list.sort(key=lambda a: (a.name, a.args))
    atom_index = {a: i for i, a in enumerate(atom_list)}
    action_index = {a: i for i, a in enumerate(action_list)}
    kind = [kinds[a] for a in atom_list]

    statics = _static_closure(sig, desc.axioms)
    static_state = 0
    for a in statics:
        static_state |= 1 << atom_index[a]
    basic_mask = defined_mask = static_mask = 0
    for i, k in enumerate(kind):
        if k == "basic":
            basic_mask |= 1 << i
        elif k == "defined":
            defined_mask |= 1 << i
        else:
            static_mask |= 1 << i

    causal: list[list[CausalLaw]] = [[] for _ in action_list]
    executability: list[list[tuple[int, int]]] = [[] for _ in action_list]
    constraints: list[Constraint] = []

    def fluent_body(body: Sequence[BodyItem], env: dict[str, str]) -> tuple[int, int, tuple[int, ...]]:
        pos = neg = 0
        ids = []
        for it in body:
            if isinstance(it, Comparison) or sig.kind_of(it.atom.name) in ("static", "sort"):
                continue
            aid = atom_index[_subst(it.atom, env)]
            ids.append(aid)
            if it.positive:
                pos |= 1 << aid
            else:
                neg |= 1 << aid
        return pos, neg, tuple(ids)

    for si, ax in enumerate(desc.axioms):
        sch = view._schemas[si]
        if ax.kind == "constraint" and sig.kind_of(ax.head.atom.name) == "static":
            continue
        for env in _enumerate(sig, sch, statics):
            pos, neg, ids = fluent_body(ax.body, env)
            if pos & neg:
                continue
            if ax.kind == "exec":
                executability[action_index[_subst(ax.action, env)]].append((pos, neg))
            elif ax.kind == "causal":
                head = atom_index[_subst(ax.head.atom, env)]
                causal[action_index[_subst(ax.action, env)]].append(CausalLaw(head, ax.head.positive, pos, neg))
            else:
                head = atom_index[_subst(ax.head.atom, env)]
                constraints.append(Constraint(len(constraints), head, ax.head.positive, pos, neg, ids, si))

    defaults: list[GroundDefault] = []
    for di, d in enumerate(desc.defaults):
        sch = _Schema(sig, d.head, None, d.body)
        for env in _enumerate(sig, sch, statics):
            pos, neg, ids = fluent_body(d.body, env)
            head = atom_index[_subst(d.head.atom, env)]
            defaults.append(GroundDefault(di, d.priority, head, d.head.positive, pos, neg, ids))
    defaults.sort(key=lambda g: (g.priority, g.head, g.index))

    log.debug("grounded %d atoms, %d actions, %d axiom instances", len(atom_list), len(action_list), len(view))
    return GroundedDescription(
        desc=desc,
        atoms=atom_list,
        atom_index=atom_index,
        kind=kind,
        actions=action_list,
        action_index=action_index,
        exogenous=[a.name in sig.exogenous for a in action_list],
        static_state=static_state,
        basic_mask=basic_mask,
        defined_mask=defined_mask,
        static_mask=static_mask,
        causal=causal,
        executability=executability,
        constraints=constraints,
        defaults=defaults,
        ground_axioms=view,
    )


def sort_product_count(sig: Signature, ax: Axiom | Default) -> int:
    """Closed-form instance count of one schema (product of its variable sort sizes)."""
    action = ax.action if isinstance(ax, Axiom) else None
    sorts = _var_sorts(sig, [ax.head, *ax.body], action)
    return math.prod(len(sig.members(s)) for s in sorts.values())
