"""Query parser and executor for a small SPARQL subset.

Supported grammar (everything the cell knowledge graph demos need: basic
graph patterns, numeric FILTER comparisons, LIMIT)::

    PREFIX echem: <https://w3id.org/emmo/domain/electrochemistry#>
    SELECT ?cell ?cap
    WHERE {
      ?cell echem:electrochemistry_9b3b... ?cap .
      FILTER(?cap >= 3)
      FILTER(?cap <= 4)
    }
    LIMIT 10

Variables start with ``?``; IRIs are written in angle brackets or as
prefixed names; string literals use double quotes.  Keywords are
case-insensitive.  No OPTIONAL, UNION, property paths, or aggregation.

Execution follows brute-force semantics -- every assignment of pattern
variables consistent with the store, filters applied to numeric bindings,
projection, de-duplication -- with results sorted by their serialized
bindings so output is deterministic.  LIMIT takes a prefix of that order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import QuerySyntaxError, UnboundFilter, UnknownPrefix
from .graph import TripleStore
from .semantic import (
    Iri,
    NumberLiteral,
    StringLiteral,
    Term,
    Triple,
    term_to_ntriples,
)

__all__ = [
    "Var",
    "Pattern",
    "Filter",
    "Query",
    "ResultTable",
    "parse_query",
    "execute_query",
]


@dataclass(frozen=True)
class Var:
    name: str


PatternTerm = Union[Var, Iri, NumberLiteral, StringLiteral]


@dataclass(frozen=True)
class Pattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm


_OPS = ("<=", ">=", "=", "<", ">")


@dataclass(frozen=True)
class Filter:
    var: str
    op: str  # one of <, <=, =, >=, >
    value: float


@dataclass(frozen=True)
class Query:
    prefixes: dict[str, str]
    select_vars: tuple[str, ...]
    patterns: tuple[Pattern, ...]
    filters: tuple[Filter, ...] = ()
    limit: int | None = None


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple[Term, ...]] = field(default_factory=list)

    def to_tsv(self) -> str:
        """Header = selected variable names; IRIs print bare, literals as
        their values."""
        lines = ["\t".join(self.columns)]
        for row in self.rows:
            lines.append("\t".join(_plain(term) for term in row))
        return "\n".join(lines) + "\n"


def _plain(term: Term) -> str:
    if isinstance(term, Iri):
        return term.value
    if isinstance(term, NumberLiteral):
        return repr(term.value) if isinstance(term.value, float) else str(term.value)
    return term.value


# ---------------------------------------------------------------------------
# tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # keyword | var | iri | pname | string | number | punct
    value: object
    line: int
    column: int


_KEYWORDS = {"prefix", "select", "where", "filter", "limit"}
_IRI_RE = re.compile(r'<[^<>"{}|^`\\\s]*>')
_VAR_RE = re.compile(r"\?[A-Za-z_][A-Za-z0-9_]*")
_PNAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.-]*:[A-Za-z0-9_.-]*")
_NUMBER_RE = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
_STRING_RE = re.compile(r'"((?:[^"\\]|\\.)*)"')
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":  # comment to end of line
            while i < n and text[i] != "\n":
                i += 1
            continue

        def emit(kind, value, length):
            tokens.append(_Token(kind, value, line, col))
            return length

        if ch == "<":
            m = _IRI_RE.match(text, i)
            if m:
                length = emit("iri", m.group(0)[1:-1], m.end() - i)
                i += length
                col += length
                continue
        if ch == '"':
            m = _STRING_RE.match(text, i)
            if not m:
                raise QuerySyntaxError("unterminated string literal", line, col)
            raw = m.group(1).replace('\\"', '"').replace("\\\\", "\\")
            length = emit("string", raw, m.end() - i)
            i += length
            col += length
            continue
        if ch == "?":
            m = _VAR_RE.match(text, i)
            if not m:
                raise QuerySyntaxError("expected a variable name after '?'", line, col)
            length = emit("var", m.group(0)[1:], m.end() - i)
            i += length
            col += length
            continue
        two = text[i:i + 2]
        if two in ("<=", ">="):
            length = emit("punct", two, 2)
            i += length
            col += length
            continue
        if ch in "{}().=<>,":
            length = emit("punct", ch, 1)
            i += length
            col += length
            continue
        if ch.isdigit() or (ch in "+-" and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == ".")):
            m = _NUMBER_RE.match(text, i)
            if m:
                raw = m.group(0)
                value = float(raw)
                length = emit("number", value, m.end() - i)
                i += length
                col += length
                continue
        m = _PNAME_RE.match(text, i)
        if m:
            length = emit("pname", m.group(0), m.end() - i)
            i += length
            col += length
            continue
        m = _WORD_RE.match(text, i)
        if m:
            word = m.group(0)
            kind = "keyword" if word.lower() in _KEYWORDS else "word"
            length = emit(kind, word.lower() if kind == "keyword" else word, m.end() - i)
            i += length
            col += length
            continue
        raise QuerySyntaxError(f"unexpected character {ch!r}", line, col)
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Cursor:
    def __init__(self, tokens: list[_Token], end_line: int):
        self.tokens = tokens
        self.pos = 0
        self.end_line = end_line

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise QuerySyntaxError("unexpected end of query", self.end_line, 1)
        self.pos += 1
        return tok

    def expect_keyword(self, word: str) -> _Token:
        tok = self.next()
        if tok.kind != "keyword" or tok.value != word:
            raise QuerySyntaxError(f"expected {word.upper()}", tok.line, tok.column)
        return tok

    def expect_punct(self, char: str) -> _Token:
        tok = self.next()
        if tok.kind != "punct" or tok.value != char:
            raise QuerySyntaxError(f"expected {char!r}", tok.line, tok.column)
        return tok


def _resolve_pname(value: str, prefixes: dict[str, str], tok: _Token) -> Iri:
    prefix, _, local = value.partition(":")
    if prefix not in prefixes:
        raise UnknownPrefix(f"unknown prefix {prefix!r} (line {tok.line})")
    return Iri(prefixes[prefix] + local)


def _parse_term(cur: _Cursor, prefixes: dict[str, str]) -> PatternTerm:
    tok = cur.next()
    if tok.kind == "var":
        return Var(tok.value)
    if tok.kind == "iri":
        return Iri(tok.value)
    if tok.kind == "pname":
        return _resolve_pname(tok.value, prefixes, tok)
    if tok.kind == "string":
        return StringLiteral(tok.value)
    if tok.kind == "number":
        return NumberLiteral(tok.value)
    raise QuerySyntaxError(
        f"expected a variable, IRI, or literal, got {tok.value!r}", tok.line, tok.column
    )


def parse_query(text: str) -> Query:
    """Parse query text; raises :class:`QuerySyntaxError` (with line and
    column), :class:`UnknownPrefix`, or :class:`UnboundFilter`."""
    if not text.strip():
        raise QuerySyntaxError("empty query", 1, 1)
    end_line = text.count("\n") + 1
    cur = _Cursor(_tokenize(text), end_line)

    prefixes: dict[str, str] = {}
    while True:
        tok = cur.peek()
        if tok is None or tok.kind != "keyword" or tok.value != "prefix":
            break
        cur.next()
        name_tok = cur.next()
        if name_tok.kind != "pname" or not name_tok.value.endswith(":"):
            raise QuerySyntaxError(
                "expected a prefix name like 'bat:'", name_tok.line, name_tok.column
            )
        iri_tok = cur.next()
        if iri_tok.kind != "iri":
            raise QuerySyntaxError(
                "expected an IRI in angle brackets", iri_tok.line, iri_tok.column
            )
        prefixes[name_tok.value[:-1]] = iri_tok.value

    cur.expect_keyword("select")
    select_vars: list[str] = []
    while True:
        tok = cur.peek()
        if tok is not None and tok.kind == "var":
            cur.next()
            select_vars.append(tok.value)
        else:
            break
    if not select_vars:
        tok = cur.peek()
        line, column = (tok.line, tok.column) if tok else (end_line, 1)
        raise QuerySyntaxError("SELECT needs at least one variable", line, column)

    cur.expect_keyword("where")
    cur.expect_punct("{")
    patterns: list[Pattern] = []
    filters: list[Filter] = []
    while True:
        tok = cur.peek()
        if tok is None:
            raise QuerySyntaxError("unterminated WHERE block", end_line, 1)
        if tok.kind == "punct" and tok.value == "}":
            cur.next()
            break
        if tok.kind == "keyword" and tok.value == "filter":
            cur.next()
            cur.expect_punct("(")
            var_tok = cur.next()
            if var_tok.kind != "var":
                raise QuerySyntaxError(
                    "FILTER expects a variable", var_tok.line, var_tok.column
                )
            op_tok = cur.next()
            op = op_tok.value if op_tok.kind == "punct" else None
            if op == "=" and cur.peek() and cur.peek().kind == "punct" \
                    and cur.peek().value == "=":
                cur.next()  # tolerate '=='
            if op not in _OPS:
                raise QuerySyntaxError(
                    f"expected a comparison operator, got {op_tok.value!r}",
                    op_tok.line,
                    op_tok.column,
                )
            num_tok = cur.next()
            if num_tok.kind != "number":
                raise QuerySyntaxError(
                    "FILTER compares against a numeric literal",
                    num_tok.line,
                    num_tok.column,
                )
            cur.expect_punct(")")
            filters.append(Filter(var_tok.value, op, num_tok.value))
            continue
        subject = _parse_term(cur, prefixes)
        predicate = _parse_term(cur, prefixes)
        obj = _parse_term(cur, prefixes)
        nxt = cur.peek()
        if nxt is not None and nxt.kind == "punct" and nxt.value == ".":
            cur.next()
        patterns.append(Pattern(subject, predicate, obj))

    limit: int | None = None
    tok = cur.peek()
    if tok is not None and tok.kind == "keyword" and tok.value == "limit":
        cur.next()
        num_tok = cur.next()
        if num_tok.kind != "number" or num_tok.value != int(num_tok.value) \
                or num_tok.value < 1:
            raise QuerySyntaxError(
                "LIMIT takes a positive integer", num_tok.line, num_tok.column
            )
        limit = int(num_tok.value)
    trailing = cur.peek()
    if trailing is not None:
        raise QuerySyntaxError(
            f"unexpected trailing input {trailing.value!r}",
            trailing.line,
            trailing.column,
        )

    if not patterns:
        raise QuerySyntaxError("WHERE block needs at least one pattern", 1, 1)

    bound = set()
    for pattern in patterns:
        for term in (pattern.subject, pattern.predicate, pattern.object):
            if isinstance(term, Var):
                bound.add(term.name)
    for f in filters:
        if f.var not in bound:
            raise UnboundFilter(f"FILTER on ?{f.var}, which no pattern binds")
    for v in select_vars:
        if v not in bound:
            raise QuerySyntaxError(f"SELECT variable ?{v} appears in no pattern", 1, 1)

    return Query(
        prefixes=prefixes,
        select_vars=tuple(select_vars),
        patterns=tuple(patterns),
        filters=tuple(filters),
        limit=limit,
    )


# ---------------------------------------------------------------------------
# executor


# Slot matching: variable joins and IRI/string constants compare terms
# exactly; numeric literals *written in the query* compare by value, so
# "3.4" matches a stored 3.4 regardless of its unit IRI.  Exact joins keep
# pattern order irrelevant to the result set.
_FREE = "free"
_EXACT = "exact"
_VALUE = "value"


def _slot_spec(term: PatternTerm, binding: dict[str, Term]):
    if isinstance(term, Var):
        if term.name in binding:
            return _EXACT, binding[term.name], None
        return _FREE, None, term.name
    if isinstance(term, NumberLiteral):
        return _VALUE, term, None
    return _EXACT, term, None


def _slot_matches(mode: str, want, value: Term) -> bool:
    if mode == _VALUE:
        return isinstance(value, NumberLiteral) and value.value == want.value
    return want == value


def _triple_slot(triple: Triple, slot: int) -> Term:
    if slot == 0:
        return Iri(triple.subject)
    if slot == 1:
        return Iri(triple.predicate)
    return triple.object


def _extend(binding: dict[str, Term], pattern: Pattern, store: TripleStore):
    specs = [
        _slot_spec(pattern.subject, binding),
        _slot_spec(pattern.predicate, binding),
        _slot_spec(pattern.object, binding),
    ]
    s_mode, s_want, _ = specs[0]
    p_mode, p_want, _ = specs[1]
    o_mode, o_want, _ = specs[2]
    s_key = s_want.value if s_mode == _EXACT and isinstance(s_want, Iri) else None
    p_key = p_want.value if p_mode == _EXACT and isinstance(p_want, Iri) else None
    o_key = o_want if o_mode == _EXACT else None
    for triple in store.match(s_key, p_key, o_key):
        new = dict(binding)
        consistent = True
        for slot, (mode, want, var) in enumerate(specs):
            value = _triple_slot(triple, slot)
            if mode == _FREE:
                if var in new:  # same variable twice in one pattern
                    if new[var] != value:
                        consistent = False
                        break
                else:
                    new[var] = value
            elif not _slot_matches(mode, want, value):
                consistent = False
                break
        if consistent:
            yield new


def _passes(binding: dict[str, Term], f: Filter) -> bool:
    term = binding.get(f.var)
    if not isinstance(term, NumberLiteral):
        return False  # non-numeric bindings are excluded, not an error
    x, y = term.value, f.value
    if f.op == "<":
        return x < y
    if f.op == "<=":
        return x <= y
    if f.op == "=":
        return x == y
    if f.op == ">=":
        return x >= y
    return x > y


def _sort_key(row: tuple[Term, ...]) -> tuple[str, ...]:
    return tuple(term_to_ntriples(term) for term in row)


def execute_query(store: TripleStore, q: Query) -> ResultTable:
    """Evaluate the query; reads only, never mutates the store."""
    bindings: list[dict[str, Term]] = [{}]
    for pattern in q.patterns:
        extended: list[dict[str, Term]] = []
        for binding in bindings:
            extended.extend(_extend(binding, pattern, store))
        bindings = extended
        if not bindings:
            break
    rows = {
        tuple(binding[v] for v in q.select_vars)
        for binding in bindings
        if all(_passes(binding, f) for f in q.filters)
    }
    ordered = sorted(rows, key=_sort_key)
    if q.limit is not None:
        ordered = ordered[: q.limit]
    return ResultTable(columns=q.select_vars, rows=ordered)
