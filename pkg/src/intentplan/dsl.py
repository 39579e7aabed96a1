"""Textual domain descriptions: syntax tree, parser and pretty-printer.

The format is line oriented. A file is a sequence of sections
(``sorts:``, ``statics:``, ``fluents:``, ``actions:``, ``axioms:``,
``defaults:``, ``refinement:``), each holding one statement per line.
A statement may continue over several lines while a bracket is open.
``#`` starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

UNIVERSE = "universe"
FINE_UNIVERSE = "universe*"

SECTIONS = ("sorts", "statics", "fluents", "actions", "axioms", "defaults", "refinement")


def is_var(term: str) -> bool:
    return term[:1].isupper()


@dataclass(frozen=True)
class Atom:
    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def negate(self) -> "Literal":
        return Literal(self.atom, not self.positive)

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"-{self.atom}"


@dataclass(frozen=True)
class Comparison:
    left: str
    op: str  # "=" or "!="
    right: str

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


BodyItem = Union[Literal, Comparison]


@dataclass(frozen=True)
class Axiom:
    kind: str  # "causal" | "constraint" | "exec"
    head: Literal | None
    action: Atom | None
    body: tuple[BodyItem, ...] = ()
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        tail = f" if {', '.join(map(str, self.body))}" if self.body else ""
        if self.kind == "causal":
            return f"{self.action} causes {self.head}{tail}"
        if self.kind == "exec":
            return f"impossible {self.action}{tail}"
        return f"{self.head}{tail}"


@dataclass(frozen=True)
class Default:
    priority: int
    head: Literal
    body: tuple[BodyItem, ...] = ()
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        tail = f" if {', '.join(map(str, self.body))}" if self.body else ""
        return f"default {self.priority}: {self.head}{tail}"


@dataclass
class Signature:
    sort_members: dict[str, tuple[str, ...]] = field(default_factory=dict)  # direct members
    sort_parent: dict[str, str] = field(default_factory=dict)
    statics: dict[str, tuple[str, ...]] = field(default_factory=dict)
    basic_fluents: dict[str, tuple[str, ...]] = field(default_factory=dict)
    defined_fluents: dict[str, tuple[str, ...]] = field(default_factory=dict)
    actions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    exogenous: frozenset[str] = frozenset()

    # -- sort queries -------------------------------------------------
    @property
    def sorts(self) -> list[str]:
        return list(self.sort_members)

    def children(self, sort: str) -> list[str]:
        return [s for s, p in self.sort_parent.items() if p == sort]

    def members(self, sort: str) -> tuple[str, ...]:
        if sort == UNIVERSE:
            out: set[str] = set()
            for s, p in self.sort_parent.items():
                if p == UNIVERSE and not s.endswith("*"):
                    out.update(self.members(s))
            return tuple(sorted(out))
        if sort == FINE_UNIVERSE:
            out = set()
            for s, p in self.sort_parent.items():
                if p == FINE_UNIVERSE:
                    out.update(self.members(s))
            return tuple(sorted(out))
        out = set(self.sort_members.get(sort, ()))
        for child in self.children(sort):
            out.update(self.members(child))
        return tuple(sorted(out))

    def ancestors(self, sort: str) -> list[str]:
        chain = [sort]
        while chain[-1] in self.sort_parent:
            chain.append(self.sort_parent[chain[-1]])
        return chain

    def is_subsort(self, sub: str, sup: str) -> bool:
        return sup in self.ancestors(sub)

    def has_sort(self, sort: str) -> bool:
        return sort in self.sort_members or sort in (UNIVERSE, FINE_UNIVERSE)

    def constants(self) -> set[str]:
        out: set[str] = set()
        for members in self.sort_members.values():
            out.update(members)
        return out

    # -- attribute queries --------------------------------------------
    def attribute(self, name: str) -> tuple[str, ...] | None:
        for table in (self.statics, self.basic_fluents, self.defined_fluents):
            if name in table:
                return table[name]
        return None

    def kind_of(self, name: str) -> str | None:
        if name in self.statics:
            return "static"
        if name in self.basic_fluents:
            return "basic"
        if name in self.defined_fluents:
            return "defined"
        if name in self.actions:
            return "action"
        if self.has_sort(name):
            return "sort"
        return None

    @property
    def agent_actions(self) -> list[str]:
        return [a for a in self.actions if a not in self.exogenous]

    def fluents(self) -> dict[str, tuple[str, ...]]:
        return {**self.basic_fluents, **self.defined_fluents}


@dataclass(frozen=True)
class Refines:
    name: str
    arg_sorts: tuple[str, ...]
    coarse: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class TestDecl:
    fluent: Atom
    agent: str
    body: tuple[BodyItem, ...] = ()
    line: int = field(default=0, compare=False)


@dataclass
class RefinementBlock:
    """Counterpart sorts, refined attributes/actions, tests and fine-only axioms."""

    fine_sorts: dict[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)
    attributes: list[Refines] = field(default_factory=list)  # attributes and actions alike
    tests: list[TestDecl] = field(default_factory=list)
    axioms: list[Axiom] = field(default_factory=list)


@dataclass
class SystemDescription:
    signature: Signature
    axioms: list[Axiom] = field(default_factory=list)
    defaults: list[Default] = field(default_factory=list)
    refinement: RefinementBlock | None = None


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    file: str = "<domain>"

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: {self.message}"


class DomainError(Exception):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<neq>!=)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*\*?)
  | (?P<int>[0-9]+)
  | (?P<punct>[(){},:=<\-+])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, file: str = "<domain>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise DomainError([Diagnostic(line, pos - line_start + 1, f"unexpected character {text[pos]!r}", file)])
        kind = m.lastgroup or ""
        col = pos - line_start + 1
        if kind == "nl":
            tokens.append(Token("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind in ("ident", "int"):
            tokens.append(Token(kind, m.group(), line, col))
        elif kind in ("neq", "punct"):
            tokens.append(Token("punct", m.group(), line, col))
        pos = m.end()
    tokens.append(Token("nl", "\n", line, pos - line_start + 1))
    return tokens


def _statements(tokens: list[Token]) -> Iterable[list[Token]]:
    """Split tokens into logical lines, joining lines inside open brackets."""
    depth = 0
    cur: list[Token] = []
    for tok in tokens:
        if tok.kind == "nl":
            if depth > 0:
                continue
            if cur:
                yield cur
            cur = []
            continue
        if tok.text in "({":
            depth += 1
        elif tok.text in ")}":
            depth = max(0, depth - 1)
        cur.append(tok)
    if cur:
        yield cur


class _Cursor:
    def __init__(self, toks: list[Token], file: str):
        self.toks = toks
        self.i = 0
        self.file = file

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            if not self.toks:
                raise DomainError(f"{self.file}: empty input")
            raise self.error(self.toks[-1], "unexpected end of statement", after=True)
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise self.error(tok, f"expected {text!r}, found {tok.text!r}")
        return tok

    def ident(self, what: str = "identifier") -> Token:
        tok = self.next()
        if tok.kind != "ident":
            raise self.error(tok, f"expected {what}, found {tok.text!r}")
        return tok

    def error(self, tok: Token, msg: str, after: bool = False) -> DomainError:
        col = tok.col + (len(tok.text) if after else 0)
        return DomainError([Diagnostic(tok.line, col, msg, self.file)])


# ---------------------------------------------------------------------------
# parser


def _parse_atom(cur: _Cursor) -> Atom:
    name = cur.ident().text
    args: list[str] = []
    if cur.accept("("):
        if not cur.accept(")"):
            while True:
                args.append(cur.ident("argument").text)
                if cur.accept(")"):
                    break
                cur.expect(",")
    return Atom(name, tuple(args))


def _parse_literal(cur: _Cursor) -> Literal:
    positive = not cur.accept("-")
    return Literal(_parse_atom(cur), positive)


def _parse_body_item(cur: _Cursor) -> BodyItem:
    tok = cur.peek()
    nxt = cur.peek(1)
    if tok is not None and tok.kind == "ident" and nxt is not None and nxt.text in ("=", "!="):
        cur.next()
        op = cur.next().text
        right = cur.ident("term").text
        return Comparison(tok.text, op, right)
    return _parse_literal(cur)


def _parse_body(cur: _Cursor) -> tuple[BodyItem, ...]:
    if not cur.accept("if"):
        return ()
    items = [_parse_body_item(cur)]
    while cur.accept(","):
        items.append(_parse_body_item(cur))
    return tuple(items)


def _finish(cur: _Cursor) -> None:
    tok = cur.peek()
    if tok is not None:
        raise cur.error(tok, f"unexpected {tok.text!r}")


def _parse_sort_list(cur: _Cursor) -> tuple[str, ...]:
    sorts: list[str] = []
    if cur.accept("("):
        if not cur.accept(")"):
            while True:
                sorts.append(cur.ident("sort name").text)
                if cur.accept(")"):
                    break
                cur.expect(",")
    return tuple(sorts)


def _parse_axiom(cur: _Cursor) -> Axiom:
    line = cur.peek().line  # type: ignore[union-attr]
    if cur.accept("impossible"):
        action = _parse_atom(cur)
        if cur.peek() is not None and cur.peek().text == ",":  # type: ignore[union-attr]
            raise cur.error(cur.peek(), "multi-action executability conditions are not supported")  # type: ignore[arg-type]
        body = _parse_body(cur)
        _finish(cur)
        return Axiom("exec", None, action, body, line)
    first = _parse_literal(cur)
    if cur.accept("causes"):
        if not first.positive:
            raise cur.error(cur.toks[0], "an action cannot be negated")
        head = _parse_literal(cur)
        body = _parse_body(cur)
        _finish(cur)
        return Axiom("causal", head, first.atom, body, line)
    body = _parse_body(cur)
    _finish(cur)
    return Axiom("constraint", first, None, body, line)


def parse_domain(text: str, file: str = "<domain>") -> SystemDescription:
    """Parse and validate a domain description; raises DomainError with diagnostics."""
    sig = Signature()
    desc = SystemDescription(sig)
    exo: set[str] = set()
    diags: list[Diagnostic] = []
    declared_at: dict[str, Token] = {}
    section: str | None = None
    sort_tokens: dict[str, Token] = {}
    attr_tokens: dict[str, Token] = {}

    def declare(tok: Token, kind: str) -> bool:
        if tok.text in declared_at:
            prev = declared_at[tok.text]
            diags.append(Diagnostic(tok.line, tok.col, f"duplicate declaration of {tok.text!r} (first declared at line {prev.line})", file))
            return False
        declared_at[tok.text] = tok
        return True

    for stmt in _statements(tokenize(text, file)):
        cur = _Cursor(stmt, file)
        try:
            first = cur.peek()
            second = cur.peek(1)
            if first is not None and first.text in SECTIONS and second is not None and second.text == ":":
                section = first.text
                cur.i += 2
                if cur.at_end():
                    if section == "refinement" and desc.refinement is None:
                        desc.refinement = RefinementBlock()
                    continue
                cur = _Cursor(stmt[2:], file)
                if section == "refinement" and desc.refinement is None:
                    desc.refinement = RefinementBlock()
            if section is None:
                raise cur.error(stmt[0], "statement outside of any section")
            if section == "sorts":
                name_tok = cur.ident("sort name")
                parent = UNIVERSE
                members: tuple[str, ...] | None = None
                if cur.accept("<"):
                    parent = cur.ident("parent sort").text
                if cur.accept("="):
                    members = _parse_members(cur)
                _finish(cur)
                if declare(name_tok, "sort"):
                    sig.sort_members[name_tok.text] = members or ()
                    sig.sort_parent[name_tok.text] = parent
                    sort_tokens[name_tok.text] = name_tok
            elif section == "statics":
                name_tok = cur.ident("static name")
                sorts = _parse_sort_list(cur)
                _finish(cur)
                if declare(name_tok, "static"):
                    sig.statics[name_tok.text] = sorts
                    attr_tokens[name_tok.text] = name_tok
            elif section == "fluents":
                kind = cur.ident("'basic' or 'defined'")
                if kind.text not in ("basic", "defined"):
                    raise cur.error(kind, f"expected 'basic' or 'defined', found {kind.text!r}")
                name_tok = cur.ident("fluent name")
                sorts = _parse_sort_list(cur)
                _finish(cur)
                if declare(name_tok, kind.text):
                    table = sig.basic_fluents if kind.text == "basic" else sig.defined_fluents
                    table[name_tok.text] = sorts
                    attr_tokens[name_tok.text] = name_tok
            elif section == "actions":
                kind = cur.ident("'agent' or 'exogenous'")
                if kind.text not in ("agent", "exogenous"):
                    raise cur.error(kind, f"expected 'agent' or 'exogenous', found {kind.text!r}")
                name_tok = cur.ident("action name")
                sorts = _parse_sort_list(cur)
                _finish(cur)
                if declare(name_tok, "action"):
                    sig.actions[name_tok.text] = sorts
                    attr_tokens[name_tok.text] = name_tok
                    if kind.text == "exogenous":
                        exo.add(name_tok.text)
            elif section == "axioms":
                desc.axioms.append(_parse_axiom(cur))
            elif section == "defaults":
                line = stmt[0].line
                cur.expect("default")
                prio = cur.next()
                if prio.kind != "int":
                    raise cur.error(prio, "expected an integer priority")
                cur.expect(":")
                head = _parse_literal(cur)
                body = _parse_body(cur)
                _finish(cur)
                desc.defaults.append(Default(int(prio.text), head, body, line))
            elif section == "refinement":
                _parse_refinement_stmt(cur, desc.refinement)  # type: ignore[arg-type]
        except DomainError as err:
            diags.extend(err.diagnostics)

    sig.exogenous = frozenset(exo)
    if not diags:
        diags.extend(_validate(desc, sort_tokens, attr_tokens, file))
    if diags:
        raise DomainError(diags)
    return desc


def _parse_members(cur: _Cursor) -> tuple[str, ...]:
    cur.expect("{")
    members: list[str] = []
    if cur.accept("}"):
        return ()
    while True:
        members.append(cur.ident("constant").text)
        if cur.accept("}"):
            return tuple(members)
        cur.expect(",")


def _parse_refinement_stmt(cur: _Cursor, block: RefinementBlock) -> None:
    first = cur.peek()
    second = cur.peek(1)
    assert first is not None
    line = first.line
    if first.kind == "ident" and first.text.endswith("*") and second is not None and second.text == "=":
        cur.i += 2
        cur.expect("{")
        pairs: list[tuple[str, str]] = []
        if not cur.accept("}"):
            while True:
                fine = cur.ident("fine constant").text
                cur.expect(":")
                coarse = cur.ident("coarse constant").text
                pairs.append((fine, coarse))
                if cur.accept("}"):
                    break
                cur.expect(",")
        _finish(cur)
        block.fine_sorts[first.text] = tuple(pairs)
        return
    if first.text == "test":
        cur.next()
        atom = _parse_atom(cur)
        cur.expect("by")
        agent = cur.ident("agent variable").text
        body = _parse_body(cur)
        _finish(cur)
        block.tests.append(TestDecl(atom, agent, body, line))
        return
    # "name*(sorts) refines name" or a fine axiom
    save = cur.i
    if first.kind == "ident" and first.text.endswith("*"):
        name = cur.next().text
        try:
            sorts = _parse_sort_list(cur)
        except DomainError:
            sorts = None
        if sorts is not None and cur.accept("refines"):
            coarse = cur.ident("coarse name").text
            _finish(cur)
            block.attributes.append(Refines(name, sorts, coarse, line))
            return
        cur.i = save
    block.axioms.append(_parse_axiom(cur))


# ---------------------------------------------------------------------------
# validation


def _validate(desc: SystemDescription, sort_tokens: dict[str, Token], attr_tokens: dict[str, Token], file: str) -> list[Diagnostic]:
    sig = desc.signature
    diags: list[Diagnostic] = []

    def at(tok: Token | None, msg: str, line: int = 0) -> None:
        if tok is not None:
            diags.append(Diagnostic(tok.line, tok.col, msg, file))
        else:
            diags.append(Diagnostic(line, 1, msg, file))

    for sort, parent in sig.sort_parent.items():
        if parent != UNIVERSE and parent not in sig.sort_members:
            at(sort_tokens.get(sort), f"undeclared sort {parent!r}")
    # cycles
    for sort in sig.sort_parent:
        seen = set()
        s = sort
        while s in sig.sort_parent and s not in seen:
            seen.add(s)
            s = sig.sort_parent[s]
        if s in seen:
            at(sort_tokens.get(sort), f"cyclic sort hierarchy through {sort!r}")
            return diags
    for sort in sig.sort_members:
        if not sig.members(sort):
            at(sort_tokens.get(sort), f"empty sort {sort!r}")
    for table in (sig.statics, sig.basic_fluents, sig.defined_fluents, sig.actions):
        for name, sorts in table.items():
            for s in sorts:
                if not sig.has_sort(s):
                    at(attr_tokens.get(name), f"undeclared sort {s!r} in declaration of {name!r}")
    if diags:
        return diags
    for ax in desc.axioms:
        for msg in check_axiom(sig, ax):
            diags.append(Diagnostic(ax.line, 1, msg, file))
    for d in desc.defaults:
        probe = Axiom("constraint", d.head, None, d.body, d.line)
        for msg in check_axiom(sig, probe):
            diags.append(Diagnostic(d.line, 1, msg, file))
        if d.head.atom.name not in sig.basic_fluents:
            diags.append(Diagnostic(d.line, 1, f"default head {d.head.atom.name!r} is not a basic fluent", file))
    return diags


def _check_atom(sig: Signature, atom: Atom, expected: str, var_sorts: dict[str, list[str]], errors: list[str]) -> None:
    kind = sig.kind_of(atom.name)
    if kind is None:
        errors.append(f"undeclared symbol {atom.name!r}")
        return
    if kind == "sort":
        if expected != "body" or len(atom.args) != 1:
            errors.append(f"sort {atom.name!r} used as an attribute")
            return
        arg_sorts: tuple[str, ...] = (atom.name,)
    elif expected == "action":
        if kind != "action":
            errors.append(f"{atom.name!r} is not an action")
            return
        arg_sorts = sig.actions[atom.name]
    else:
        if kind == "action":
            errors.append(f"action {atom.name!r} used as a literal")
            return
        arg_sorts = sig.attribute(atom.name) or ()
    if len(arg_sorts) != len(atom.args):
        errors.append(f"arity mismatch for {atom.name!r}: expected {len(arg_sorts)} arguments, got {len(atom.args)}")
        return
    consts = sig.constants()
    for term, sort in zip(atom.args, arg_sorts):
        if is_var(term):
            var_sorts.setdefault(term, []).append(sort)
        elif term not in consts:
            errors.append(f"undeclared constant {term!r}")
        elif term not in sig.members(sort):
            errors.append(f"constant {term!r} is not of sort {sort!r}")


def most_specific(sig: Signature, sorts: Sequence[str]) -> str | None:
    best = sorts[0]
    for s in sorts[1:]:
        if sig.is_subsort(s, best):
            best = s
        elif not sig.is_subsort(best, s):
            if s == UNIVERSE or best == UNIVERSE:
                continue
            return None
    return best


def check_axiom(sig: Signature, ax: Axiom | Default) -> list[str]:
    """Return error messages for an axiom (empty when well formed)."""
    errors: list[str] = []
    var_sorts: dict[str, list[str]] = {}
    if isinstance(ax, Axiom) and ax.action is not None:
        _check_atom(sig, ax.action, "action", var_sorts, errors)
    if ax.head is not None:
        _check_atom(sig, ax.head.atom, "head", var_sorts, errors)
        kind = sig.kind_of(ax.head.atom.name)
        if isinstance(ax, Axiom) and ax.kind == "causal" and kind not in (None, "basic"):
            errors.append(f"causal law head {ax.head.atom.name!r} must be a basic fluent")
    for item in ax.body:
        if isinstance(item, Literal):
            if sig.kind_of(item.atom.name) == "sort" and not item.positive:
                errors.append(f"negated sort atom {item.atom}")
            _check_atom(sig, item.atom, "body", var_sorts, errors)
    for item in ax.body:
        if isinstance(item, Comparison):
            for t in (item.left, item.right):
                if is_var(t) and t not in var_sorts:
                    errors.append(f"variable {t!r} occurs only in a comparison")
    if isinstance(ax, Axiom) and ax.head is not None:
        for t in ax.head.atom.args:
            if is_var(t) and t not in var_sorts:
                errors.append(f"unbound variable {t!r}")
    for var, sorts in var_sorts.items():
        if most_specific(sig, sorts) is None:
            errors.append(f"variable {var!r} used with incompatible sorts {sorted(set(sorts))}")
    return errors


# ---------------------------------------------------------------------------
# printer


def format_domain(desc: SystemDescription) -> str:
    sig = desc.signature
    out: list[str] = ["sorts:"]
    for sort, members in sig.sort_members.items():
        parent = sig.sort_parent.get(sort, UNIVERSE)
        line = f"  {sort}"
        if parent != UNIVERSE:
            line += f" < {parent}"
        if members or not sig.children(sort):
            line += " = {" + ", ".join(members) + "}"
        out.append(line)

    def decl(name: str, sorts: tuple[str, ...]) -> str:
        return f"{name}({', '.join(sorts)})" if sorts else name

    if sig.statics:
        out.append("statics:")
        out.extend(f"  {decl(n, s)}" for n, s in sig.statics.items())
    if sig.basic_fluents or sig.defined_fluents:
        out.append("fluents:")
        out.extend(f"  basic {decl(n, s)}" for n, s in sig.basic_fluents.items())
        out.extend(f"  defined {decl(n, s)}" for n, s in sig.defined_fluents.items())
    if sig.actions:
        out.append("actions:")
        for n, s in sig.actions.items():
            out.append(f"  {'exogenous' if n in sig.exogenous else 'agent'} {decl(n, s)}")
    if desc.axioms:
        out.append("axioms:")
        out.extend(f"  {ax}" for ax in desc.axioms)
    if desc.defaults:
        out.append("defaults:")
        out.extend(f"  {d}" for d in desc.defaults)
    ref = desc.refinement
    if ref is not None:
        out.append("refinement:")
        for sort, pairs in ref.fine_sorts.items():
            out.append(f"  {sort} = {{" + ", ".join(f"{f}: {c}" for f, c in pairs) + "}")
        for r in ref.attributes:
            out.append(f"  {decl(r.name, r.arg_sorts)} refines {r.coarse}")
        for t in ref.tests:
            tail = f" if {', '.join(map(str, t.body))}" if t.body else ""
            out.append(f"  test {t.fluent} by {t.agent}{tail}")
        out.extend(f"  {ax}" for ax in ref.axioms)
    return "\n".join(out) + "\n"


def parse_literal(text: str) -> Literal:
    """Parse a single literal such as ``-loc(book1, library)``."""
    toks = [t for t in tokenize(text) if t.kind != "nl"]
    cur = _Cursor(toks, "<literal>")
    lit = _parse_literal(cur)
    _finish(cur)
    return lit


def parse_literals(text: str) -> list[Literal]:
    """Parse a comma separated literal list (commas inside parentheses are kept)."""
    toks = [t for t in tokenize(text) if t.kind != "nl"]
    if not toks:
        return []
    cur = _Cursor(toks, "<goal>")
    out = [_parse_literal(cur)]
    while cur.accept(","):
        out.append(_parse_literal(cur))
    _finish(cur)
    return out


def builtin_text(name: str = "ra") -> str:
    from importlib.resources import files

    return files("intentplan").joinpath(f"data/{name}.dom").read_text(encoding="utf-8")


def builtin_domain(name: str = "ra") -> SystemDescription:
    """Load a domain shipped with the package (``ra`` is the robot assistant)."""
    return parse_domain(builtin_text(name), f"{name}.dom")
