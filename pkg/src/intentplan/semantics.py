"""States and the transition function of a grounded description.

A state is a Python ``int`` used as a bit set over atom ids (statics
included). Bodies are compiled to a pair of masks, so a body holds in
``s`` iff ``s & pos == pos and not s & neg``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

from .grounding import Constraint, GroundedDescription

State = int

ORACLE_BOUND = 24


@dataclass(frozen=True)
class Inexecutable:
    action: int


@dataclass(frozen=True)
class Inconsistent:
    constraint: int | None = None


TransitionResult = Union[State, Inexecutable, Inconsistent]


class OracleBoundExceeded(Exception):
    pass


def bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def body_holds(s: int, pos: int, neg: int) -> bool:
    return s & pos == pos and not s & neg


def defined_closure(g: GroundedDescription, s: State) -> State:
    """Recompute defined fluents as the least fixpoint of their rules (closed world)."""
    s &= ~g.defined_mask
    agenda: list[int] = []
    for c in g.defined_rules:
        hb = 1 << c.head
        if not s & hb and s & c.pos == c.pos and not s & c.neg:
            s |= hb
            agenda.append(c.head)
    watch = g.defined_watch
    while agenda:
        a = agenda.pop()
        for c in watch.get(a, ()):
            hb = 1 << c.head
            if not s & hb and s & c.pos == c.pos and not s & c.neg:
                s |= hb
                agenda.append(c.head)
    return s


def violated(g: GroundedDescription, s: State) -> Constraint | None:
    """First constraint whose body holds while its head is false, if any."""
    for c in g.constraints:
        if s & c.pos == c.pos and not s & c.neg and bool(s >> c.head & 1) != c.value:
            return c
    return None


def complete_state(partial: Mapping[int, bool] | Iterable[tuple[int, bool]], g: GroundedDescription) -> State | Inconsistent:
    """Close a partial assignment: propagate basic-headed constraints, default the
    rest of the basic fluents to false, derive defined fluents, then check every
    constraint."""
    assign: dict[int, bool] = dict(partial.items() if isinstance(partial, Mapping) else partial)
    for aid, val in assign.items():
        if g.kind[aid] == "static" and bool(g.static_state >> aid & 1) != val:
            return Inconsistent(None)
        if g.kind[aid] == "defined":
            return Inconsistent(None)

    def value(aid: int) -> bool | None:
        if g.kind[aid] == "static":
            return bool(g.static_state >> aid & 1)
        return assign.get(aid)

    def fires(c: Constraint) -> bool:
        for aid in c.atoms:
            v = value(aid)
            if v is None or v != bool(c.pos >> aid & 1):
                return False
        return True

    work = [c for c in g.basic_constraints if not any(g.kind[a] == "defined" for a in c.atoms)]
    changed = True
    while changed:
        changed = False
        for c in work:
            if fires(c):
                cur = assign.get(c.head)
                if cur is None:
                    assign[c.head] = c.value
                    changed = True
                elif cur != c.value:
                    return Inconsistent(c.cid)
    s = g.static_state
    for aid, val in assign.items():
        if val:
            s |= 1 << aid
    s = defined_closure(g, s)
    bad = violated(g, s)
    if bad is not None:
        return Inconsistent(bad.cid)
    return s


# ---------------------------------------------------------------------------
# transition function


def direct_effects(g: GroundedDescription, s: State, action: int) -> tuple[int, int] | None:
    """(mask, values) of the heads of triggered causal laws; None if they clash."""
    e_set = e_val = 0
    for law in g.causal[action]:
        if s & law.pos == law.pos and not s & law.neg:
            bit = 1 << law.head
            if e_set & bit and bool(e_val & bit) != law.value:
                return None
            e_set |= bit
            if law.value:
                e_val |= bit
    return e_set, e_val


def executable(g: GroundedDescription, s: State, action: int) -> bool:
    for pos, neg in g.executability[action]:
        if s & pos == pos and not s & neg:
            return False
    return True


def successor(s: State, action: int, g: GroundedDescription) -> TransitionResult:
    """Apply one action: direct effects, inertia for the rest, constraint closure."""
    if not executable(g, s, action):
        return Inexecutable(action)
    eff = direct_effects(g, s, action)
    if eff is None:
        return Inconsistent(None)
    e_set, e_val = eff
    if g.mixed:
        return _general_successor(g, s, e_set, e_val)
    cur = (s & ~e_set) | e_val
    fixed = e_set
    work = list(bits((cur ^ s) & g.basic_mask))
    if not work and not e_set:
        return s
    pending: list[Constraint] = []
    cons = g.constraints
    watch = g.watch
    while work:
        a = work.pop()
        for cid in watch.get(a, ()):
            c = cons[cid]
            if cur & c.pos == c.pos and not cur & c.neg:
                hb = 1 << c.head
                if bool(cur & hb) != c.value:
                    if fixed & hb:
                        pending.append(c)
                        continue
                    cur ^= hb
                    fixed |= hb
                    work.append(c.head)
    for c in pending:
        if cur & c.pos == c.pos and not cur & c.neg and bool(cur >> c.head & 1) != c.value:
            return _general_successor(g, s, e_set, e_val)
    derived = (cur ^ s) & g.basic_mask & ~e_set
    if derived and not _supported(g, s, cur, derived):
        return _general_successor(g, s, e_set, e_val)
    cur = defined_closure(g, cur)
    for c in g.defined_integrity:
        if cur & c.pos == c.pos and not cur & c.neg and cur >> c.head & 1:
            return Inconsistent(c.cid)
    return cur


def _supported(g: GroundedDescription, s: State, cur: State, derived: int) -> bool:
    """Every inertia-violating literal must be derivable without circular support."""
    unresolved = derived
    progress = True
    while unresolved and progress:
        progress = False
        for d in bits(unresolved):
            want = bool(cur >> d & 1)
            for cid in g.by_head.get(d, ()):
                c = g.constraints[cid]
                if c.value == want and cur & c.pos == c.pos and not cur & c.neg and not (c.pos | c.neg) & unresolved:
                    unresolved &= ~(1 << d)
                    progress = True
                    break
    return not unresolved


def _consequences(g: GroundedDescription, known_pos: int, known_neg: int, defined_src: State) -> tuple[int, int] | None:
    """Close a literal set under the basic-headed constraints."""
    changed = True
    while changed:
        changed = False
        for c in g.basic_constraints:
            pos_ok = c.pos & ~g.defined_mask
            neg_ok = c.neg & ~g.defined_mask
            if known_pos & pos_ok != pos_ok or known_neg & neg_ok != neg_ok:
                continue
            dpos, dneg = c.pos & g.defined_mask, c.neg & g.defined_mask
            if defined_src & dpos != dpos or defined_src & dneg:
                continue
            hb = 1 << c.head
            if c.value:
                if known_neg & hb:
                    return None
                if not known_pos & hb:
                    known_pos |= hb
                    changed = True
            else:
                if known_pos & hb:
                    return None
                if not known_neg & hb:
                    known_neg |= hb
                    changed = True
    return known_pos, known_neg


def is_fixpoint(g: GroundedDescription, s: State, e_set: int, e_val: int, s2: State) -> bool:
    """McCain-Turner style check: s2 == Cn(E + (s & s2)) on basic fluents."""
    basic = g.basic_mask
    same = ~(s ^ s2) & basic
    known_pos = (s2 & same) | e_val | g.static_state
    known_neg = (~s2 & same & basic) | (e_set & ~e_val)
    if known_pos & known_neg:
        return False
    res = _consequences(g, known_pos, known_neg, s2)
    if res is None:
        return False
    kp, kn = res
    return kp & basic == s2 & basic and kn & basic == ~s2 & basic


def _general_successor(g: GroundedDescription, s: State, e_set: int, e_val: int) -> TransitionResult:
    """Backtracking search for the fixpoint successor (used when the fast path cannot decide)."""
    order = g.basic_ids
    plain = [c for c in g.basic_constraints if not c.atoms or not any(g.kind[a] == "defined" for a in c.atoms)]
    assign: dict[int, bool] = {}
    for aid in bits(e_set):
        assign[aid] = bool(e_val >> aid & 1)

    def propagate(asg: dict[int, bool]) -> dict[int, bool] | None:
        asg = dict(asg)
        changed = True
        while changed:
            changed = False
            for c in plain:
                ok = True
                for aid in c.atoms:
                    v = asg.get(aid)
                    if v is None or v != bool(c.pos >> aid & 1):
                        ok = False
                        break
                if not ok:
                    continue
                cur = asg.get(c.head)
                if cur is None:
                    asg[c.head] = c.value
                    changed = True
                elif cur != c.value:
                    return None
        return asg

    def leaf(asg: dict[int, bool]) -> State | None:
        s2 = g.static_state
        for aid, v in asg.items():
            if v:
                s2 |= 1 << aid
        s2 = defined_closure(g, s2)
        if violated(g, s2) is not None:
            return None
        return s2 if is_fixpoint(g, s, e_set, e_val, s2) else None

    def dfs(asg: dict[int, bool]) -> State | None:
        asg2 = propagate(asg)
        if asg2 is None:
            return None
        for aid in order:
            if aid not in asg2:
                inertial = bool(s >> aid & 1)
                for v in (inertial, not inertial):
                    trial = dict(asg2)
                    trial[aid] = v
                    out = dfs(trial)
                    if out is not None:
                        return out
                return None
        return leaf(asg2)

    result = dfs(assign)
    return Inconsistent(None) if result is None else result


# ---------------------------------------------------------------------------
# oracles


def legal_states(g: GroundedDescription, bound: int = ORACLE_BOUND) -> Iterator[State]:
    """All assignments to basic fluents that complete_state accepts unchanged."""
    order = g.basic_ids
    if len(order) > bound:
        raise OracleBoundExceeded(f"{len(order)} basic atoms exceed oracle bound {bound}")
    checks = [c for c in g.basic_constraints if not any(g.kind[a] == "defined" for a in c.atoms)]
    position = {aid: i for i, aid in enumerate(order)}
    ready: list[list[Constraint]] = [[] for _ in order]
    for c in checks:
        last = max([position[c.head], *(position[a] for a in c.atoms)])
        ready[last].append(c)

    def rec(i: int, s: int) -> Iterator[State]:
        if i == len(order):
            full = {aid: bool(s >> aid & 1) for aid in order}
            res = complete_state(full, g)
            if not isinstance(res, Inconsistent) and res & g.basic_mask == s & g.basic_mask:
                yield res
            return
        aid = order[i]
        for v in (False, True):
            s2 = s | (1 << aid) if v else s
            full = s2 | g.static_state
            if all(not (full & c.pos == c.pos and not full & c.neg) or bool(full >> c.head & 1) == c.value for c in ready[i]):
                yield from rec(i + 1, s2)

    yield from rec(0, 0)


def successor_oracle(s: State, action: int, g: GroundedDescription, states: list[State] | None = None) -> list[State] | Inexecutable:
    """Brute force: every legal state equal to Cn(E + (s & s2))."""
    if not executable(g, s, action):
        return Inexecutable(action)
    eff = direct_effects(g, s, action)
    if eff is None:
        return []
    e_set, e_val = eff
    pool = states if states is not None else list(legal_states(g))
    return [s2 for s2 in pool if s2 & e_set == e_val and is_fixpoint(g, s, e_set, e_val, s2)]


def naive_closure(g: GroundedDescription, partial: Mapping[int, bool]) -> State | Inconsistent:
    """Oracle for complete_state: full passes over every constraint until stable."""
    assign = dict(partial)
    while True:
        before = dict(assign)
        for c in g.basic_constraints:
            if all((g.static_state >> a & 1 if g.kind[a] == "static" else assign.get(a)) == bool(c.pos >> a & 1)
                   for a in c.atoms if g.kind[a] != "defined"):
                if any(g.kind[a] == "defined" for a in c.atoms):
                    continue
                if c.head in assign and assign[c.head] != c.value:
                    return Inconsistent(c.cid)
                assign[c.head] = c.value
        if assign == before:
            break
    s = g.static_state
    for a, v in assign.items():
        if v:
            s |= 1 << a
    changed = True
    while changed:
        changed = False
        for c in g.defined_rules:
            if s & c.pos == c.pos and not s & c.neg and not s >> c.head & 1:
                s |= 1 << c.head
                changed = True
    bad = violated(g, s)
    return Inconsistent(bad.cid) if bad else s
