"""Recursive-descent parser for the Spider-style SQL subset.

Queries parse against a SchemaCatalog. Aliases are resolved and discarded;
every column reference comes back qualified with its canonical table name.
Errors carry kind (lex/grammar/resolution) and a character offset.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import SchemaCatalog
from .errors import ParseError
from .sql_ast import (
    AGG_OPS,
    STAR,
    BoolExpr,
    ColumnRef,
    Comparison,
    Condition,
    FromClause,
    Join,
    Literal,
    OrderItem,
    SelectItem,
    SqlAst,
    render_sql,
)

_KEYWORDS = {
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT",
    "JOIN", "INNER", "ON", "AS", "AND", "OR", "NOT", "IN", "LIKE", "BETWEEN",
    "DISTINCT", "COUNT", "SUM", "AVG", "MIN", "MAX",
    "INTERSECT", "UNION", "EXCEPT", "ASC", "DESC",
}

_TWO_CHAR_SYMS = ("!=", "<=", ">=", "<>")
_ONE_CHAR_SYMS = "=<>(),.*-"


@dataclass(frozen=True)
class _Token:
    kind: str  # KEYWORD | IDENT | NUMBER | STRING | SYM | EOF
    text: str
    pos: int


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            j = text.find("'", i + 1)
            if j < 0:
                raise ParseError("lex", i, "unterminated string literal")
            tokens.append(_Token("STRING", text[i : j + 1], i))
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            tokens.append(_Token("NUMBER", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KEYWORD" if word.upper() in _KEYWORDS else "IDENT"
            tokens.append(_Token(kind, word, i))
            i = j
            continue
        if text[i : i + 2] in _TWO_CHAR_SYMS:
            sym = text[i : i + 2]
            tokens.append(_Token("SYM", "!=" if sym == "<>" else sym, i))
            i += 2
            continue
        if ch in _ONE_CHAR_SYMS:
            tokens.append(_Token("SYM", ch, i))
            i += 1
            continue
        raise ParseError("lex", i, f"illegal character {ch!r}")
    tokens.append(_Token("EOF", "", n))
    return tokens


@dataclass(frozen=True)
class _RawRef:
    qualifier: str | None
    name: str
    pos: int


class _Scope:
    """FROM-clause scope: canonical tables plus the alias map."""

    def __init__(self, catalog: SchemaCatalog) -> None:
        self.catalog = catalog
        self.tables: list[str] = []
        self.aliases: dict[str, str] = {}

    def add(self, table_tok: _Token, alias: _Token | None) -> str:
        table = self.catalog.find_table(table_tok.text)
        if table is None:
            raise ParseError("resolution", table_tok.pos, f"unknown table '{table_tok.text}'")
        self.tables.append(table.name)
        self.aliases.setdefault(table_tok.text.lower(), table.name)
        if alias is not None:
            key = alias.text.lower()
            if key in self.aliases and self.aliases[key] != table.name:
                raise ParseError("resolution", alias.pos, f"duplicate alias '{alias.text}'")
            self.aliases[key] = table.name
        return table.name

    def resolve(self, raw: _RawRef) -> ColumnRef:
        if raw.name == "*":
            return STAR
        if raw.qualifier is not None:
            table = self.aliases.get(raw.qualifier.lower())
            if table is None:
                raise ParseError(
                    "resolution", raw.pos, f"unknown table or alias '{raw.qualifier}'"
                )
            col = self.catalog.find_column(table, raw.name)
            if col is None:
                raise ParseError(
                    "resolution", raw.pos, f"no column '{raw.name}' in table '{table}'"
                )
            return ColumnRef(table, col.name)
        owners = [
            t for t in dict.fromkeys(self.tables) if self.catalog.find_column(t, raw.name)
        ]
        if not owners:
            raise ParseError("resolution", raw.pos, f"unknown column '{raw.name}'")
        if len(owners) > 1:
            raise ParseError(
                "resolution", raw.pos,
                f"ambiguous column '{raw.name}' (in {', '.join(owners)})",
            )
        col = self.catalog.find_column(owners[0], raw.name)
        assert col is not None
        return ColumnRef(owners[0], col.name)


class _Parser:
    def __init__(self, tokens: list[_Token], catalog: SchemaCatalog) -> None:
        self.tokens = tokens
        self.catalog = catalog
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.text.upper() in words

    def take_keyword(self, *words: str) -> _Token | None:
        if self.at_keyword(*words):
            return self.advance()
        return None

    def expect_keyword(self, word: str) -> _Token:
        tok = self.take_keyword(word)
        if tok is None:
            got = self.peek()
            raise ParseError("grammar", got.pos, f"expected {word}, found {got.text or 'end of input'!r}")
        return tok

    def at_sym(self, sym: str) -> bool:
        tok = self.peek()
        return tok.kind == "SYM" and tok.text == sym

    def expect_sym(self, sym: str) -> _Token:
        if not self.at_sym(sym):
            got = self.peek()
            raise ParseError("grammar", got.pos, f"expected {sym!r}, found {got.text or 'end of input'!r}")
        return self.advance()

    # -- grammar -----------------------------------------------------------

    def parse_query(self, allow_set_op: bool = True) -> SqlAst:
        self.expect_keyword("SELECT")
        raw_select = self._parse_select_items()
        self.expect_keyword("FROM")
        scope, from_clause_raw = self._parse_from()

        raw_where = raw_group = raw_having = raw_order = None
        limit: int | None = None
        if self.take_keyword("WHERE"):
            raw_where = self._parse_or(scope)
        if self.take_keyword("GROUP"):
            self.expect_keyword("BY")
            raw_group = self._parse_ref_list()
        if self.take_keyword("HAVING"):
            raw_having = self._parse_or(scope)
        if self.take_keyword("ORDER"):
            self.expect_keyword("BY")
            raw_order = self._parse_order_items()
        if self.take_keyword("LIMIT"):
            tok = self.peek()
            if tok.kind != "NUMBER" or "." in tok.text:
                raise ParseError("grammar", tok.pos, "LIMIT requires a non-negative integer")
            self.advance()
            limit = int(tok.text)

        set_op: tuple[str, SqlAst] | None = None
        if allow_set_op and self.at_keyword(*("INTERSECT", "UNION", "EXCEPT")):
            op = self.advance().text.upper()
            set_op = (op, self.parse_query(allow_set_op=False))

        select = tuple(
            SelectItem(agg, scope.resolve(raw), distinct)
            for agg, raw, distinct in raw_select
        )
        for idx, item in enumerate(select):
            if item.distinct and item.agg is None and idx > 0:
                raise ParseError(
                    "grammar", raw_select[idx][1].pos,
                    "bare DISTINCT is only valid on the first select item",
                )
        from_clause = self._resolve_from(scope, from_clause_raw)
        return SqlAst(
            select=select,
            from_clause=from_clause,
            where=raw_where,
            group_by=tuple(scope.resolve(r) for r in raw_group) if raw_group else (),
            having=raw_having,
            order_by=tuple(
                OrderItem(scope.resolve(r), agg, direction)
                for agg, r, direction in raw_order
            ) if raw_order else (),
            limit=limit,
            set_op=set_op,
        )

    def _parse_select_items(self) -> list[tuple[str | None, _RawRef, bool]]:
        items: list[tuple[str | None, _RawRef, bool]] = []
        leading_distinct = self.take_keyword("DISTINCT") is not None
        while True:
            items.append(self._parse_select_item(leading_distinct and not items))
            if self.at_sym(","):
                self.advance()
                continue
            break
        return items

    def _parse_select_item(self, distinct: bool) -> tuple[str | None, _RawRef, bool]:
        if self.at_keyword(*AGG_OPS):
            agg = self.advance().text.upper()
            self.expect_sym("(")
            inner_distinct = self.take_keyword("DISTINCT") is not None
            raw = self._parse_ref(allow_star=True)
            self.expect_sym(")")
            return agg, raw, inner_distinct
        raw = self._parse_ref(allow_star=True)
        return None, raw, distinct

    def _parse_from(self) -> tuple[_Scope, list[tuple[str, _RawRef, _RawRef] | str]]:
        scope = _Scope(self.catalog)
        first = self._parse_table_ref(scope)
        raw_joins: list[tuple[str, _RawRef, _RawRef] | str] = [first]
        while self.at_keyword("JOIN", "INNER"):
            if self.take_keyword("INNER"):
                self.expect_keyword("JOIN")
            else:
                self.advance()
            table = self._parse_table_ref(scope)
            self.expect_keyword("ON")
            left = self._parse_ref(allow_star=False)
            self.expect_sym("=")
            right = self._parse_ref(allow_star=False)
            raw_joins.append((table, left, right))
        return scope, raw_joins

    def _parse_table_ref(self, scope: _Scope) -> str:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise ParseError("grammar", tok.pos, f"expected table name, found {tok.text or 'end of input'!r}")
        self.advance()
        alias = None
        if self.take_keyword("AS"):
            alias = self.peek()
            if alias.kind != "IDENT":
                raise ParseError("grammar", alias.pos, "expected alias name after AS")
            self.advance()
        return scope.add(tok, alias)

    def _resolve_from(
        self, scope: _Scope, raw: list[tuple[str, _RawRef, _RawRef] | str]
    ) -> FromClause:
        first = raw[0]
        assert isinstance(first, str)
        joins = []
        for entry in raw[1:]:
            table, left, right = entry  # type: ignore[misc]
            joins.append(Join(table, scope.resolve(left), scope.resolve(right)))
        return FromClause(first, tuple(joins))

    def _parse_ref(self, allow_star: bool) -> _RawRef:
        tok = self.peek()
        if tok.kind == "SYM" and tok.text == "*":
            if not allow_star:
                raise ParseError("grammar", tok.pos, "'*' is not valid here")
            self.advance()
            return _RawRef(None, "*", tok.pos)
        if tok.kind != "IDENT":
            raise ParseError("grammar", tok.pos, f"expected column reference, found {tok.text or 'end of input'!r}")
        self.advance()
        if self.at_sym("."):
            self.advance()
            col = self.peek()
            if col.kind != "IDENT":
                raise ParseError("grammar", col.pos, "expected column name after '.'")
            self.advance()
            return _RawRef(tok.text, col.text, tok.pos)
        return _RawRef(None, tok.text, tok.pos)

    def _parse_ref_list(self) -> list[_RawRef]:
        refs = [self._parse_ref(allow_star=False)]
        while self.at_sym(","):
            self.advance()
            refs.append(self._parse_ref(allow_star=False))
        return refs

    def _parse_order_items(self) -> list[tuple[str | None, _RawRef, str]]:
        items = []
        while True:
            agg = None
            if self.at_keyword(*AGG_OPS):
                agg = self.advance().text.upper()
                self.expect_sym("(")
                raw = self._parse_ref(allow_star=True)
                self.expect_sym(")")
            else:
                raw = self._parse_ref(allow_star=False)
            direction = "ASC"
            if self.at_keyword("ASC", "DESC"):
                direction = self.advance().text.upper()
            items.append((agg, raw, direction))
            if self.at_sym(","):
                self.advance()
                continue
            return items

    # -- conditions ---------------------------------------------------------

    def _parse_or(self, scope: _Scope) -> Condition:
        cond = self._parse_and(scope)
        while self.take_keyword("OR"):
            cond = BoolExpr("OR", cond, self._parse_and(scope))
        return cond

    def _parse_and(self, scope: _Scope) -> Condition:
        cond = self._parse_atom(scope)
        while self.take_keyword("AND"):
            cond = BoolExpr("AND", cond, self._parse_atom(scope))
        return cond

    def _parse_atom(self, scope: _Scope) -> Condition:
        if self.at_sym("("):
            self.advance()
            cond = self._parse_or(scope)
            self.expect_sym(")")
            return cond
        return self._parse_comparison(scope)

    def _parse_comparison(self, scope: _Scope) -> Comparison:
        agg = None
        if self.at_keyword(*AGG_OPS):
            agg = self.advance().text.upper()
            self.expect_sym("(")
            raw = self._parse_ref(allow_star=True)
            self.expect_sym(")")
        else:
            raw = self._parse_ref(allow_star=False)
        left = scope.resolve(raw)

        tok = self.peek()
        if tok.kind == "SYM" and tok.text in ("=", "!=", "<", ">", "<=", ">="):
            self.advance()
            return Comparison(left, tok.text, self._parse_compare_rhs(), agg)
        if self.at_keyword("LIKE"):
            self.advance()
            return Comparison(left, "LIKE", self._parse_literal(), agg)
        if self.at_keyword("BETWEEN"):
            self.advance()
            lo = self._parse_literal()
            self.expect_keyword("AND")
            hi = self._parse_literal()
            return Comparison(left, "BETWEEN", (lo, hi), agg)
        negate = False
        if self.at_keyword("NOT"):
            self.advance()
            negate = True
        if self.at_keyword("IN"):
            self.advance()
            return Comparison(left, "NOT IN" if negate else "IN", self._parse_in_rhs(), agg)
        raise ParseError("grammar", tok.pos, f"expected comparison operator, found {tok.text or 'end of input'!r}")

    def _parse_compare_rhs(self) -> Literal | SqlAst:
        if self.at_sym("("):
            self.advance()
            sub = self.parse_query(allow_set_op=False)
            self.expect_sym(")")
            return sub
        return self._parse_literal()

    def _parse_in_rhs(self) -> SqlAst | tuple[Literal, ...]:
        self.expect_sym("(")
        if self.at_keyword("SELECT"):
            sub = self.parse_query(allow_set_op=False)
            self.expect_sym(")")
            return sub
        values = [self._parse_literal()]
        while self.at_sym(","):
            self.advance()
            values.append(self._parse_literal())
        self.expect_sym(")")
        return tuple(values)

    def _parse_literal(self) -> Literal:
        tok = self.peek()
        if tok.kind == "SYM" and tok.text == "-":
            self.advance()
            num = self.peek()
            if num.kind != "NUMBER":
                raise ParseError("grammar", num.pos, "expected number after '-'")
            self.advance()
            return Literal(f"-{num.text}")
        if tok.kind in ("NUMBER", "STRING"):
            self.advance()
            return Literal(tok.text)
        raise ParseError("grammar", tok.pos, f"expected literal value, found {tok.text or 'end of input'!r}")


def parse_sql(text: str, catalog: SchemaCatalog) -> SqlAst:
    """Parse one query of the subset; raises ParseError on any failure."""
    tokens = _lex(text)
    parser = _Parser(tokens, catalog)
    ast = parser.parse_query()
    tail = parser.peek()
    if tail.kind != "EOF":
        raise ParseError("grammar", tail.pos, f"unexpected trailing input {tail.text!r}")
    return ast


def reparse(ast: SqlAst, catalog: SchemaCatalog) -> SqlAst:
    """Round-trip helper: parse the canonical rendering of an AST."""
    return parse_sql(render_sql(ast), catalog)
