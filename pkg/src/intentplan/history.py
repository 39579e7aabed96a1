"""Recorded histories and their minimal-cost explanations.

A model of a history picks an initial state (prioritised defaults, possibly
with exceptions) and a small set of hypothesised exogenous actions so that
every observation matches the resulting trajectory. Models are compared by
``(exogenous count, exception count)`` and then by the earliest insertions.
"""
from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

from .dsl import Atom, Literal, parse_literal
from .grounding import GroundDefault, GroundedDescription
from .planning import Goal
from .semantics import Inconsistent, State, complete_state, successor

log = logging.getLogger(__name__)

MAX_EXOGENOUS = 2


@dataclass(frozen=True)
class Obs:
    fluent: Atom
    value: bool
    step: int

    def __str__(self) -> str:
        return f"obs({self.fluent}, {'true' if self.value else 'false'}, {self.step})"


@dataclass(frozen=True)
class Hpd:
    action: Atom
    step: int

    def __str__(self) -> str:
        return f"hpd({self.action}, {self.step})"


@dataclass(frozen=True)
class NotHpd:
    action: Atom
    step: int

    def __str__(self) -> str:
        return f"nothpd({self.action}, {self.step})"


@dataclass(frozen=True)
class Attempt:
    action: Atom
    step: int

    def __str__(self) -> str:
        return f"attempt({self.action}, {self.step})"


Record = Union[Obs, Hpd, NotHpd, Attempt]

_LOG_LINE = re.compile(r"^(obs|hpd|nothpd|attempt)\((.*)\)$")


@dataclass
class History:
    records: list[Record] = field(default_factory=list)
    current_step: int = 0

    def add(self, rec: Record) -> None:
        if rec.step > self.current_step:
            raise ValueError(f"record {rec} is beyond the current step {self.current_step}")
        if isinstance(rec, (Hpd, NotHpd)) and any(
                isinstance(r, (Hpd, NotHpd)) and r.step == rec.step and r.action == rec.action for r in self.records):
            raise ValueError(f"second verdict for {rec.action} at step {rec.step}")
        self.records.append(rec)

    def observe(self, atom: Atom | str, value: bool, step: int | None = None) -> None:
        if isinstance(atom, str):
            atom = parse_literal(atom).atom
        self.add(Obs(atom, value, self.current_step if step is None else step))

    def advance(self) -> None:
        self.current_step += 1

    def copy(self) -> History:
        return History(list(self.records), self.current_step)

    def observations(self, step: int | None = None) -> list[Obs]:
        return [r for r in self.records if isinstance(r, Obs) and (step is None or r.step == step)]

    def to_log(self) -> str:
        lines = [str(r) for r in self.records]
        lines.append(f"step({self.current_step})")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_log(cls, text: str) -> History:
        h = cls()
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("step(") and line.endswith(")"):
                h.current_step = int(line[5:-1])
                continue
            m = _LOG_LINE.match(line)
            if not m:
                raise ValueError(f"bad history line: {line!r}")
            kind, inner = m.groups()
            head, _, tail = inner.rpartition(",")
            step = int(tail)
            if kind == "obs":
                atom_text, _, val = head.rpartition(",")
                rec: Record = Obs(parse_literal(atom_text).atom, val.strip() == "true", step)
            else:
                atom = parse_literal(head).atom
                rec = {"hpd": Hpd, "nothpd": NotHpd, "attempt": Attempt}[kind](atom, step)
            h.current_step = max(h.current_step, step)
            h.records.append(rec)
        return h


# ---------------------------------------------------------------------------
# initial states from defaults


@dataclass(frozen=True)
class Candidate:
    state: State
    exceptions: tuple[tuple[int, Literal], ...]

    @property
    def cost(self) -> int:
        return len(self.exceptions)


def _propagate(g: GroundedDescription, known: dict[int, bool]) -> dict[int, bool] | None:
    """Three-valued closure of the basic-headed constraints; None on conflict."""
    known = dict(known)

    def val(a: int) -> bool | None:
        if g.kind[a] == "static":
            return bool(g.static_state >> a & 1)
        return known.get(a)

    cons = [c for c in g.basic_constraints if not any(g.kind[a] == "defined" for a in c.atoms)]
    changed = True
    while changed:
        changed = False
        for c in cons:
            if all(val(a) == bool(c.pos >> a & 1) for a in c.atoms):
                v = known.get(c.head)
                if v is None:
                    known[c.head] = c.value
                    changed = True
                elif v != c.value:
                    return None
    return known


def _family(g: GroundedDescription, atom_id: int) -> list[int]:
    """Atoms sharing name and all but the last argument (one functional attribute)."""
    a = g.atoms[atom_id]
    return [i for i in g.basic_ids if g.atoms[i].name == a.name and g.atoms[i].args[:-1] == a.args[:-1]]


def initial_state_candidates(g: GroundedDescription, history: History) -> list[Candidate]:
    """Initial states ordered by exception count (stronger defaults tried first)."""
    known: dict[int, bool] = {}
    for ob in history.observations(0):
        aid = g.atom_index.get(ob.fluent)
        if aid is None or g.kind[aid] != "basic":
            continue
        if known.get(aid, ob.value) != ob.value:
            return []
        known[aid] = ob.value
    start = _propagate(g, known)
    if start is None:
        return []
    out: list[tuple[int, int, Candidate]] = []
    serial = itertools.count()
    defaults = g.defaults

    def body_true(d: GroundDefault, kn: dict[int, bool]) -> bool:
        return all(kn.get(a) == bool(d.pos >> a & 1) for a in d.atoms)

    def finish(kn: dict[int, bool], excepted: list[tuple[int, GroundDefault]]) -> None:
        families: list[list[int]] = []
        seen: set[int] = set()
        for _, d in excepted:
            fam = _family(g, d.head)
            if fam[0] in seen:
                continue
            seen.add(fam[0])
            if any(kn.get(a) is True for a in fam):
                continue
            families.append([a for a in fam if a not in kn])
        exc = tuple((d.index, Literal(g.atoms[d.head], d.value)) for _, d in excepted)
        for choice in itertools.product(*[[None, *fam] for fam in families]):
            trial = dict(kn)
            for c in choice:
                if c is not None:
                    trial[c] = True
            s = complete_state(trial, g)
            if not isinstance(s, Inconsistent):
                out.append((len(exc), next(serial), Candidate(s, exc)))

    def rec(i: int, kn: dict[int, bool], excepted: list[tuple[int, GroundDefault]]) -> None:
        if i == len(defaults):
            finish(kn, excepted)
            return
        d = defaults[i]
        if not body_true(d, kn) or d.head in kn:
            rec(i + 1, kn, excepted)
            return
        accepted = _propagate(g, {**kn, d.head: d.value})
        if accepted is not None:
            rec(i + 1, accepted, excepted)
        rec(i + 1, kn, [*excepted, (i, d)])

    rec(0, start, [])
    out.sort(key=lambda t: (t[0], t[1]))
    return [c for _, _, c in out]


# ---------------------------------------------------------------------------
# consistent models


@dataclass(frozen=True)
class Explanation:
    default_exceptions: tuple[tuple[int, Literal], ...] = ()
    exogenous_insertions: tuple[tuple[Atom, int], ...] = ()

    @property
    def cost(self) -> tuple[int, int]:
        return len(self.exogenous_insertions), len(self.default_exceptions)


@dataclass(frozen=True)
class ModelOfHistory:
    trajectory: tuple[State, ...]
    explanation: Explanation
    actions: tuple[tuple[Atom, ...], ...] = ()

    @property
    def final(self) -> State:
        return self.trajectory[-1]


@dataclass(frozen=True)
class NoModel:
    diagnostic: str


def _step_actions(g: GroundedDescription, history: History) -> dict[int, int]:
    """Agent actions that happened, by step (mental and unverified attempts are skipped)."""
    out: dict[int, int] = {}
    for r in history.records:
        if isinstance(r, Hpd):
            aid = g.action_index.get(r.action)
            if aid is not None:
                out[r.step] = aid
    return out


def _obs_masks(g: GroundedDescription, history: History) -> dict[int, tuple[int, int]]:
    out: dict[int, tuple[int, int]] = {}
    for ob in history.observations():
        aid = g.atom_index.get(ob.fluent)
        if aid is None:
            continue
        pos, neg = out.get(ob.step, (0, 0))
        if ob.value:
            pos |= 1 << aid
        else:
            neg |= 1 << aid
        out[ob.step] = (pos, neg)
    return out


def _fits(s: State, masks: tuple[int, int] | None) -> bool:
    if masks is None:
        return True
    pos, neg = masks
    return s & pos == pos and not s & neg


Key = tuple[int, tuple[tuple[int, int], ...]]


def _final_layer(
    g: GroundedDescription, s0: State, n: int, acts: dict[int, int], obs: dict[int, tuple[int, int]], budget: int,
) -> dict[State, tuple[Key, list[State]]]:
    """Layered search: per state keep the cheapest (count, insertions) prefix.

    Keeping one entry per state is exact: a state reached with fewer
    insertions, or the same number placed earlier, dominates on every suffix.
    """
    if not _fits(s0, obs.get(0)):
        return {}
    layer: dict[State, tuple[Key, list[State]]] = {s0: ((0, ()), [s0])}
    exo_ids = g.exo_action_ids
    for step in range(n):
        nxt_layer: dict[State, tuple[Key, list[State]]] = {}
        agent = acts.get(step)
        for s, (key, path) in sorted(layer.items(), key=lambda kv: kv[1][0]):
            count, ins = key
            options: list[tuple[tuple[int, ...], State]] = [((), s)]
            room = budget - count
            if room > 0:
                frontier = [((), s)]
                for _ in range(room):
                    grown = []
                    for chosen, st in frontier:
                        for e in exo_ids:
                            if chosen and e <= chosen[-1]:
                                continue
                            r = successor(st, e, g)
                            if isinstance(r, int) and r != st:
                                grown.append(((*chosen, e), r))
                    options.extend(grown)
                    frontier = grown
            for chosen, st in options:
                if agent is not None:
                    r = successor(st, agent, g)
                    if not isinstance(r, int):
                        continue
                    st = r
                if not _fits(st, obs.get(step + 1)):
                    continue
                k2: Key = (count + len(chosen), ins + tuple((step, e) for e in chosen))
                cur = nxt_layer.get(st)
                if cur is None or k2 < cur[0]:
                    nxt_layer[st] = (k2, [*path, st])
        layer = nxt_layer
        if not layer:
            return {}
    return layer


def minimal_models(
    g: GroundedDescription, history: History, max_exogenous: int = MAX_EXOGENOUS,
    candidates: Sequence[Candidate] | None = None,
) -> list[ModelOfHistory]:
    """Every cheapest model, one per distinct final state, best tie-break first."""
    cands = list(candidates) if candidates is not None else initial_state_candidates(g, history)
    acts = _step_actions(g, history)
    obs = _obs_masks(g, history)
    n = history.current_step
    found: list[tuple[tuple, int, Candidate, list[State]]] = []
    # most histories need no exogenous action at all, so try that first
    for budget in (0, max_exogenous) if max_exogenous > 0 else (0,):
        for ci, c in enumerate(cands):
            if budget == 0 and found and c.cost > found[0][0][1]:
                break
            for (count, ins), path in _final_layer(g, c.state, n, acts, obs, budget).values():
                found.append(((count, c.cost, ins), ci, c, path))
        if found:
            break
    if not found:
        return []
    found.sort(key=lambda f: (f[0], f[1]))
    cost = found[0][0][:2]
    out: list[ModelOfHistory] = []
    seen: set[State] = set()
    for (count, exc, ins), _, cand, path in found:
        if (count, exc) != cost or path[-1] in seen:
            continue
        seen.add(path[-1])
        out.append(_model(g, n, acts, ins, cand, path))
    return out


def _model(g: GroundedDescription, n: int, acts: dict[int, int], ins: tuple[tuple[int, int], ...],
           cand: Candidate, path: list[State]) -> ModelOfHistory:
    insertions = tuple((g.actions[e], step) for step, e in ins)
    step_actions = []
    for step in range(n):
        here = [g.actions[e] for st, e in ins if st == step]
        if step in acts:
            here.append(g.actions[acts[step]])
        step_actions.append(tuple(here))
    return ModelOfHistory(tuple(path), Explanation(cand.exceptions, insertions), tuple(step_actions))


def consistent_model(
    g: GroundedDescription, history: History, max_exogenous: int = MAX_EXOGENOUS,
    candidates: Sequence[Candidate] | None = None,
) -> ModelOfHistory | NoModel:
    """Cheapest model of the history under (exogenous, exceptions, earliest insertions)."""
    cands = list(candidates) if candidates is not None else initial_state_candidates(g, history)
    if not cands:
        return NoModel("step-0 observations contradict the domain")
    models = minimal_models(g, history, max_exogenous, cands)
    if not models:
        return NoModel(f"no explanation with at most {max_exogenous} exogenous actions")
    return models[0]


def cautious_model(
    g: GroundedDescription, history: History, goal: Goal, max_exogenous: int = MAX_EXOGENOUS,
) -> ModelOfHistory | NoModel:
    """The first cheapest model in which ``goal`` fails, if any.

    The goal then counts as achieved only when every cheapest model agrees,
    and plans are made against a model that still needs work.
    """
    cands = initial_state_candidates(g, history)
    if not cands:
        return NoModel("step-0 observations contradict the domain")
    models = minimal_models(g, history, max_exogenous, cands)
    if not models:
        return NoModel(f"no explanation with at most {max_exogenous} exogenous actions")
    for m in models:
        if not goal.holds(g, m.final):
            return m
    return models[0]


def goal_achieved(model: ModelOfHistory, goal: Goal, g: GroundedDescription) -> bool:
    return goal.holds(g, model.final)


# ---------------------------------------------------------------------------
# oracle


def explanation_oracle(g: GroundedDescription, history: History, max_exogenous: int = MAX_EXOGENOUS,
                       states: Iterable[State] | None = None) -> tuple[int, int] | None:
    """Exhaustive minimum cost over initial states, exception sets and insertion sets."""
    from .semantics import legal_states

    pool = list(states) if states is not None else list(legal_states(g))
    acts = _step_actions(g, history)
    obs = _obs_masks(g, history)
    n = history.current_step
    obs0 = obs.get(0, (0, 0))
    defaults = g.defaults
    governed = {d.head for d in defaults}

    def entailed_false(atom: int) -> bool:
        return all(s >> atom & 1 == 0 for s in pool if _fits(s, obs0))

    def exclusive(a: int, b: int) -> bool:
        return not any(s >> a & 1 and s >> b & 1 for s in pool)

    exo_slots = [(step, e) for step in range(n) for e in g.exo_action_ids]
    insertion_sets = [c for k in range(max_exogenous + 1) for c in itertools.combinations(exo_slots, k)]
    best: tuple[int, int] | None = None
    for s0 in pool:
        if not _fits(s0, obs0):
            continue
        observed = {a for a in g.basic_ids if (obs0[0] | obs0[1]) >> a & 1}
        keep = {a: bool(s0 >> a & 1) for a in g.basic_ids if a in observed or a in governed}
        if complete_state(keep, g) != s0:
            continue
        for k in range(len(defaults) + 1):
            for xs in itertools.combinations(range(len(defaults)), k):
                ok = True
                for i, d in enumerate(defaults):
                    if i in xs or not all(bool(s0 >> a & 1) == bool(d.pos >> a & 1) for a in d.atoms):
                        continue
                    if bool(s0 >> d.head & 1) == d.value or entailed_false(d.head):
                        continue
                    if any(j not in xs and defaults[j].priority < d.priority and s0 >> defaults[j].head & 1
                           and exclusive(defaults[j].head, d.head) for j in range(len(defaults))):
                        continue
                    ok = False
                    break
                if not ok:
                    continue
                for ins in insertion_sets:
                    cost = (len(ins), k)
                    if best is not None and cost >= best:
                        continue
                    if _replay(g, s0, n, acts, obs, ins):
                        best = cost
    return best


def _replay(g: GroundedDescription, s: State, n: int, acts: dict[int, int], obs: dict[int, tuple[int, int]],
            ins: Sequence[tuple[int, int]]) -> bool:
    for step in range(n):
        for st, e in ins:
            if st == step:
                r = successor(s, e, g)
                if not isinstance(r, int):
                    return False
                s = r
        if step in acts:
            r = successor(s, acts[step], g)
            if not isinstance(r, int):
                return False
            s = r
        if not _fits(s, obs.get(step + 1)):
            return False
    return True
