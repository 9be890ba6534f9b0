"""Scenario files (.mp): a line-oriented language for declaring kinds,
objects, quantities, adjacency, and matter-moving events.

Grammar (lowercase keywords, `#` comments, times written tN):

    quantity-kind NAME [requires NAME (, NAME)*]
    object-kind NAME
    object NAME : KIND [at tN]
    quantity NAME : KIND at tN granules { NAME (, NAME)* }
    connect NAME NAME at tN
    disconnect NAME NAME at tN
    subquantity NAME of NAME
    event NAME at tN { donor NAME+ ;
                       create NAME : KIND granules { NAME (, NAME)* } ;
                       discard { NAME (, NAME)* } }

A `quantity` statement desugars to a creation event named `create-NAME`.
An `event` with donors is a granule transfer; an `event` without donors and
with a single `create` clause is a named creation. Braced blocks may span
lines. Forward references are allowed within a file; all references are
resolved after the full parse.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EngineError, ScenarioLoadError
from .events import CreatedEntry, apply_creation, apply_transfer
from .model import KindDecl, KnowledgeBase, OBJECT_KIND, QUANTITY_KIND

KEYWORDS = {
    "quantity-kind", "object-kind", "object", "quantity", "connect", "disconnect",
    "subquantity", "event", "requires", "at", "granules", "of", "donor", "create",
    "discard",
}

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_TIME_RE = re.compile(r"^t(\d+)$")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")


@dataclass(frozen=True)
class Pos:
    line: int
    column: int


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    snippet: str
    severity: str = "error"

    def render(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass(frozen=True)
class KindStmt:
    name: str
    meta: str
    requires: tuple[str, ...]
    pos: Pos


@dataclass(frozen=True)
class ObjectStmt:
    id: str
    kind: str
    at: int
    pos: Pos


@dataclass(frozen=True)
class QuantityStmt:
    id: str
    kind: str
    at: int
    granules: tuple[str, ...]
    pos: Pos


@dataclass(frozen=True)
class AdjacencyStmt:
    a: str
    b: str
    at: int
    connect: bool
    pos: Pos


@dataclass(frozen=True)
class SubquantityStmt:
    part: str
    whole: str
    pos: Pos


@dataclass(frozen=True)
class CreateClause:
    id: str
    kind: str
    granules: tuple[str, ...]
    pos: Pos


@dataclass(frozen=True)
class EventStmt:
    name: str
    at: int
    donors: tuple[str, ...]
    creates: tuple[CreateClause, ...]
    discard: tuple[str, ...]
    pos: Pos


@dataclass
class Scenario:
    """Parsed and fully resolved form of one scenario file."""

    kind_decls: list[KindStmt] = field(default_factory=list)
    object_decls: list[ObjectStmt] = field(default_factory=list)
    quantity_creations: list[QuantityStmt] = field(default_factory=list)
    adjacency: list[AdjacencyStmt] = field(default_factory=list)
    subquantity_assertions: list[SubquantityStmt] = field(default_factory=list)
    events: list[EventStmt] = field(default_factory=list)


@dataclass
class ParseResult:
    """Either a resolved scenario or at least one diagnostic, never both."""

    scenario: Scenario | None
    diagnostics: list[ParseDiagnostic]

    @property
    def ok(self) -> bool:
        return self.scenario is not None


@dataclass(frozen=True)
class _Token:
    kind: str  # word | time | punct | newline | eof
    value: str
    line: int
    column: int
    number: int = 0


class _Bail(Exception):
    pass


def _lex(text: str) -> tuple[list[_Token], list[ParseDiagnostic], list[str]]:
    lines = text.split("\n")
    tokens: list[_Token] = []
    diags: list[ParseDiagnostic] = []
    depth = 0  # newlines inside braces do not terminate statements
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        col = 0
        while col < len(line):
            ch = line[col]
            if ch in " \t":
                col += 1
                continue
            if ch == "#":
                break
            if ch in ":,;{}":
                if ch == "{":
                    depth += 1
                elif ch == "}" and depth > 0:
                    depth -= 1
                tokens.append(_Token("punct", ch, lineno, col + 1))
                col += 1
                continue
            m = _WORD_RE.match(line, col)
            if m:
                word = m.group(0)
                tm = _TIME_RE.match(word)
                if tm:
                    tokens.append(_Token("time", word, lineno, col + 1, int(tm.group(1))))
                else:
                    tokens.append(_Token("word", word, lineno, col + 1))
                col = m.end()
                continue
            diags.append(ParseDiagnostic(lineno, col + 1, f"unexpected character {ch!r}", line))
            col += 1
        if depth == 0:
            tokens.append(_Token("newline", "\n", lineno, len(line) + 1))
    tokens.append(_Token("eof", "", len(lines), len(lines[-1]) + 1))
    return tokens, diags, lines


class _Parser:
    def __init__(self, tokens: list[_Token], lines: list[str]):
        self.tokens = tokens
        self.i = 0
        self.lines = lines
        self.last = tokens[0]
        self.diags: list[ParseDiagnostic] = []
        self.scenario = Scenario()

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        if tok.kind not in ("newline", "eof"):
            self.last = tok
        return tok

    def snippet(self, line: int) -> str:
        if 1 <= line <= len(self.lines):
            return self.lines[line - 1].rstrip("\r")
        return ""

    def error(self, message: str, at: _Token | Pos) -> None:
        self.diags.append(ParseDiagnostic(at.line, at.column, message, self.snippet(at.line)))

    def bail(self, message: str, at: _Token | Pos) -> None:
        self.error(message, at)
        raise _Bail()

    def expect_name(self, what: str) -> str:
        tok = self.peek()
        if tok.kind == "word" and tok.value not in KEYWORDS and _NAME_RE.match(tok.value):
            self.advance()
            return tok.value
        if tok.kind == "word" and tok.value in KEYWORDS:
            self.bail(f"keyword '{tok.value}' cannot be used as {what}", tok)
        if tok.kind == "word":
            self.bail(f"'{tok.value}' is not a valid {what} (letters, digits, '_')", tok)
        if tok.kind in ("newline", "eof"):
            self.bail(f"expected {what}", self.last)
        self.bail(f"expected {what}, found {tok.value!r}", tok)
        raise AssertionError  # unreachable

    def expect_time(self) -> int:
        tok = self.peek()
        if tok.kind == "time":
            self.advance()
            return tok.number
        if tok.kind in ("newline", "eof"):
            self.bail("expected a time point like t0", self.last)
        self.bail(f"expected a time point like t0, found {tok.value!r}", tok)
        raise AssertionError

    def expect_punct(self, ch: str) -> _Token:
        tok = self.peek()
        if tok.kind == "punct" and tok.value == ch:
            return self.advance()
        if tok.kind in ("newline", "eof"):
            self.bail(f"expected '{ch}'", self.last)
        self.bail(f"expected '{ch}', found {tok.value!r}", tok)
        raise AssertionError

    def expect_keyword(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind == "word" and tok.value == word:
            return self.advance()
        if tok.kind in ("newline", "eof"):
            self.bail(f"expected '{word}'", self.last)
        self.bail(f"expected '{word}', found {tok.value!r}", tok)
        raise AssertionError

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.value == word

    def at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.value == ch

    def end_statement(self) -> None:
        tok = self.peek()
        if tok.kind in ("newline", "eof"):
            self.advance()
            return
        self.bail(f"unexpected {tok.value!r} after end of statement", tok)

    def recover(self) -> None:
        while self.peek().kind not in ("newline", "eof"):
            self.advance()
        if self.peek().kind == "newline":
            self.advance()

    # -- statements ----------------------------------------------------------

    def parse(self) -> None:
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return
            if tok.kind == "newline":
                self.advance()
                continue
            try:
                self.statement(tok)
            except _Bail:
                self.recover()

    def statement(self, tok: _Token) -> None:
        handlers = {
            "quantity-kind": self.kind_stmt,
            "object-kind": self.kind_stmt,
            "object": self.object_stmt,
            "quantity": self.quantity_stmt,
            "connect": self.adjacency_stmt,
            "disconnect": self.adjacency_stmt,
            "subquantity": self.subquantity_stmt,
            "event": self.event_stmt,
        }
        if tok.kind == "word" and tok.value in handlers:
            handlers[tok.value](self.advance())
            return
        if tok.kind == "word":
            self.bail(f"unknown statement '{tok.value}'", tok)
        self.bail(f"a statement cannot start with {tok.value!r}", tok)

    def kind_stmt(self, kw: _Token) -> None:
        name = self.expect_name("a kind name")
        requires: list[str] = []
        if kw.value == "quantity-kind" and self.at_keyword("requires"):
            self.advance()
            requires.append(self.expect_name("an object kind name"))
            while self.at_punct(","):
                self.advance()
                requires.append(self.expect_name("an object kind name"))
        meta = QUANTITY_KIND if kw.value == "quantity-kind" else OBJECT_KIND
        self.end_statement()
        self.scenario.kind_decls.append(KindStmt(name, meta, tuple(requires), Pos(kw.line, kw.column)))

    def object_stmt(self, kw: _Token) -> None:
        name = self.expect_name("an object name")
        self.expect_punct(":")
        kind = self.expect_name("a kind name")
        at = 0
        if self.at_keyword("at"):
            self.advance()
            at = self.expect_time()
        self.end_statement()
        self.scenario.object_decls.append(ObjectStmt(name, kind, at, Pos(kw.line, kw.column)))

    def quantity_stmt(self, kw: _Token) -> None:
        name = self.expect_name("a quantity name")
        self.expect_punct(":")
        kind = self.expect_name("a kind name")
        self.expect_keyword("at")
        at = self.expect_time()
        self.expect_keyword("granules")
        granules = self.name_block()
        self.end_statement()
        self.scenario.quantity_creations.append(
            QuantityStmt(name, kind, at, granules, Pos(kw.line, kw.column))
        )

    def adjacency_stmt(self, kw: _Token) -> None:
        a = self.expect_name("an object name")
        b = self.expect_name("an object name")
        self.expect_keyword("at")
        at = self.expect_time()
        self.end_statement()
        self.scenario.adjacency.append(
            AdjacencyStmt(a, b, at, kw.value == "connect", Pos(kw.line, kw.column))
        )

    def subquantity_stmt(self, kw: _Token) -> None:
        part = self.expect_name("a quantity name")
        self.expect_keyword("of")
        whole = self.expect_name("a quantity name")
        self.end_statement()
        self.scenario.subquantity_assertions.append(
            SubquantityStmt(part, whole, Pos(kw.line, kw.column))
        )

    def event_stmt(self, kw: _Token) -> None:
        name = self.expect_name("an event name")
        self.expect_keyword("at")
        at = self.expect_time()
        open_brace = self.expect_punct("{")
        donors: list[str] = []
        creates: list[CreateClause] = []
        discard: list[str] = []
        saw_discard = False
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.value == "}":
                self.advance()
                break
            if tok.kind == "eof":
                self.bail("unclosed event block", open_brace)
            if tok.kind == "punct" and tok.value == ";":
                self.advance()
                continue
            if self.at_keyword("donor"):
                self.advance()
                donors.append(self.expect_name("a quantity name"))
                while self.peek().kind == "word" and self.peek().value not in KEYWORDS:
                    donors.append(self.expect_name("a quantity name"))
            elif self.at_keyword("create"):
                create_kw = self.advance()
                cid = self.expect_name("a quantity name")
                self.expect_punct(":")
                ckind = self.expect_name("a kind name")
                self.expect_keyword("granules")
                cgranules = self.name_block()
                creates.append(CreateClause(cid, ckind, cgranules, Pos(create_kw.line, create_kw.column)))
            elif self.at_keyword("discard"):
                if saw_discard:
                    self.bail("event block has more than one discard clause", tok)
                saw_discard = True
                self.advance()
                discard.extend(self.name_block())
            else:
                label = tok.value if tok.kind != "newline" else "end of line"
                self.bail(f"expected donor, create, discard or '}}', found {label!r}", tok)
        if not creates:
            self.bail("event block needs at least one create clause", kw)
        if not donors and len(creates) > 1:
            self.bail("an event without donors can create only one quantity", kw)
        if not donors and discard:
            self.bail("an event without donors cannot discard granules", kw)
        self.end_statement()
        self.scenario.events.append(
            EventStmt(name, at, tuple(donors), tuple(creates), tuple(discard), Pos(kw.line, kw.column))
        )

    def name_block(self) -> tuple[str, ...]:
        self.expect_punct("{")
        names: list[str] = []
        if self.at_punct("}"):
            self.advance()
            return ()
        names.append(self.expect_name("a name"))
        while self.at_punct(","):
            self.advance()
            names.append(self.expect_name("a name"))
        self.expect_punct("}")
        return tuple(names)


def _resolve(scenario: Scenario, lines: list[str]) -> list[ParseDiagnostic]:
    diags: list[ParseDiagnostic] = []

    def err(pos: Pos, message: str) -> None:
        snippet = lines[pos.line - 1].rstrip("\r") if 1 <= pos.line <= len(lines) else ""
        diags.append(ParseDiagnostic(pos.line, pos.column, message, snippet))

    kinds: dict[str, KindStmt] = {}
    for st in scenario.kind_decls:
        if st.name in kinds:
            err(st.pos, f"kind '{st.name}' declared twice")
        kinds[st.name] = st

    entities: dict[str, Pos] = {}

    def declare_entity(name: str, pos: Pos, what: str) -> None:
        if name in entities:
            err(pos, f"{what} '{name}' reuses an already declared name")
        entities[name] = pos

    objects = {st.id for st in scenario.object_decls}
    quantity_names: set[str] = set()
    for st in scenario.object_decls:
        declare_entity(st.id, st.pos, "object")
    for st in scenario.quantity_creations:
        declare_entity(st.id, st.pos, "quantity")
        quantity_names.add(st.id)
    for ev in scenario.events:
        declare_entity(ev.name, ev.pos, "event")
        for cl in ev.creates:
            declare_entity(cl.id, cl.pos, "quantity")
            quantity_names.add(cl.id)

    def check_kind(name: str, meta: str, pos: Pos, context: str) -> None:
        st = kinds.get(name)
        if st is None:
            err(pos, f"{context} references undeclared kind '{name}'")
        elif st.meta != meta:
            wanted = "an object kind" if meta == OBJECT_KIND else "a quantity kind"
            err(pos, f"{context} references '{name}', which is not {wanted}")

    for st in scenario.kind_decls:
        for req in st.requires:
            check_kind(req, OBJECT_KIND, st.pos, f"kind '{st.name}'")
    for st in scenario.object_decls:
        check_kind(st.kind, OBJECT_KIND, st.pos, f"object '{st.id}'")
    for st in scenario.quantity_creations:
        check_kind(st.kind, QUANTITY_KIND, st.pos, f"quantity '{st.id}'")
        for g in st.granules:
            if g not in objects:
                err(st.pos, f"quantity '{st.id}' lists undeclared object '{g}' as a granule")
    for st in scenario.adjacency:
        verb = "connect" if st.connect else "disconnect"
        for oid in (st.a, st.b):
            if oid not in objects:
                err(st.pos, f"{verb} references undeclared object '{oid}'")
    for st in scenario.subquantity_assertions:
        for qid in (st.part, st.whole):
            if qid not in quantity_names:
                err(st.pos, f"subquantity references undeclared quantity '{qid}'")
    for ev in scenario.events:
        for donor in ev.donors:
            if donor not in quantity_names:
                err(ev.pos, f"event '{ev.name}' lists undeclared quantity '{donor}' as donor")
        for cl in ev.creates:
            check_kind(cl.kind, QUANTITY_KIND, cl.pos, f"quantity '{cl.id}'")
            for g in cl.granules:
                if g not in objects:
                    err(cl.pos, f"quantity '{cl.id}' lists undeclared object '{g}' as a granule")
        for g in ev.discard:
            if g not in objects:
                err(ev.pos, f"event '{ev.name}' discards undeclared object '{g}'")

    timeline = sorted(
        [(st.at, st.pos, f"creation of '{st.id}'") for st in scenario.quantity_creations]
        + [(ev.at, ev.pos, f"event '{ev.name}'") for ev in scenario.events],
        key=lambda item: (item[0], item[1].line, item[1].column),
    )
    for (at1, _, label1), (at2, pos2, label2) in zip(timeline, timeline[1:]):
        if at1 == at2:
            err(pos2, f"{label2} shares time point t{at2} with {label1}; event times must strictly increase")
    return diags


def parse(text: str) -> ParseResult:
    """Parse scenario source text; total over arbitrary input."""
    tokens, diags, lines = _lex(text)
    parser = _Parser(tokens, lines)
    parser.parse()
    diags = diags + parser.diags
    if not diags:
        diags = _resolve(parser.scenario, lines)
    if diags:
        diags.sort(key=lambda d: (d.line, d.column, d.message))
        return ParseResult(None, diags)
    return ParseResult(parser.scenario, [])


def parse_bytes(data: bytes) -> ParseResult:
    """Decode UTF-8 and parse; encoding failures become positioned diagnostics."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        prefix = data[: exc.start].decode("utf-8", errors="replace")
        line = prefix.count("\n") + 1
        column = len(prefix) - (prefix.rfind("\n") + 1) + 1
        snippet_line = prefix.split("\n")[-1]
        diag = ParseDiagnostic(
            line, column, f"invalid UTF-8 at byte offset {exc.start}: {exc.reason}", snippet_line
        )
        return ParseResult(None, [diag])
    return parse(text)


def load(scenario: Scenario) -> KnowledgeBase:
    """Build a knowledge base by routing every statement through the engine.

    The first engine error aborts the load, wrapped with the source location
    of the offending statement.
    """
    kb = KnowledgeBase()

    def run(pos: Pos, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (EngineError, ValueError) as exc:
            raise ScenarioLoadError(str(exc), pos.line, pos.column, exc) from exc

    for st in scenario.kind_decls:
        if st.meta == OBJECT_KIND:
            run(st.pos, kb.declare_kind, KindDecl(st.name, st.meta))
    for st in scenario.kind_decls:
        if st.meta == QUANTITY_KIND:
            run(st.pos, kb.declare_kind, KindDecl(st.name, st.meta, frozenset(st.requires)))
    for st in scenario.object_decls:
        run(st.pos, kb.create_object, st.id, st.kind, st.at)

    timeline: list[tuple[int, int, QuantityStmt | EventStmt]] = []
    for order, qst in enumerate(scenario.quantity_creations):
        timeline.append((qst.at, order, qst))
    for order, ev in enumerate(scenario.events, start=len(scenario.quantity_creations)):
        timeline.append((ev.at, order, ev))
    for _, _, stmt in sorted(timeline, key=lambda item: (item[0], item[1])):
        if isinstance(stmt, QuantityStmt):
            entry = CreatedEntry.of(stmt.id, stmt.kind, stmt.granules)
            run(stmt.pos, apply_creation, kb, entry, stmt.at, event_id=f"create-{stmt.id}")
        elif stmt.donors:
            created = [CreatedEntry.of(c.id, c.kind, c.granules) for c in stmt.creates]
            run(stmt.pos, apply_transfer, kb, stmt.donors, created, stmt.at,
                discarded=stmt.discard, event_id=stmt.name)
        else:
            cl = stmt.creates[0]
            run(stmt.pos, apply_creation, kb, CreatedEntry.of(cl.id, cl.kind, cl.granules),
                stmt.at, event_id=stmt.name)

    for order, st in sorted(enumerate(scenario.adjacency), key=lambda io: (io[1].at, io[0])):
        if st.connect:
            run(st.pos, kb.assert_adjacency, st.a, st.b, st.at)
        else:
            run(st.pos, kb.retract_adjacency, st.a, st.b, st.at)
    for st in scenario.subquantity_assertions:
        run(st.pos, kb.assert_subquantity, st.part, st.whole)
    return kb
