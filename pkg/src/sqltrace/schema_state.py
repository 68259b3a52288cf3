"""Schema-state extraction and model-input serialization.

A schema state maps every catalog slot (table or column) to the set of SQL
clause keywords under which that item occurs in a query; the empty set
renders as [NONE]. The serialized model input lays out the conversation
history followed by one "slot = value" span per catalog slot.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from .catalog import SchemaCatalog
from .sql_ast import Comparison, Condition, SqlAst

KEYWORDS = ("SELECT", "FROM", "JOIN", "WHERE", "GROUP_BY", "HAVING", "ORDER_BY")

CLS, SEP, MASK, NONE = "[CLS]", "[SEP]", "[MASK]", "[NONE]"

_WORD_RE = re.compile(r"[a-z0-9_.']+|[^\sa-z0-9_.']")


class CatalogMismatchError(ValueError):
    """Two schema states do not share the same slot universe."""


class InputTooLongError(ValueError):
    """The schema-state section alone exceeds the input length budget."""


@dataclass(frozen=True)
class SchemaState:
    slots: tuple[tuple[str, frozenset[str]], ...]

    def __post_init__(self) -> None:
        for name, value in self.slots:
            bad = value - set(KEYWORDS)
            if bad:
                raise ValueError(f"slot '{name}' carries unknown keywords {sorted(bad)}")

    @classmethod
    def all_none(cls, catalog: SchemaCatalog) -> "SchemaState":
        return cls(tuple((slot, frozenset()) for slot in catalog.slots()))

    def slot_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.slots)

    def value_of(self, name: str) -> frozenset[str]:
        for slot, value in self.slots:
            if slot == name:
                return value
        raise KeyError(name)

    def nonempty(self) -> dict[str, frozenset[str]]:
        return {name: value for name, value in self.slots if value}

    def to_json_obj(self) -> dict:
        return {
            "slots": [
                {"name": name, "value": [k for k in KEYWORDS if k in value]}
                for name, value in self.slots
            ]
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SchemaState":
        return cls(
            tuple(
                (slot["name"], frozenset(slot["value"])) for slot in obj["slots"]
            )
        )


@dataclass(frozen=True)
class ClauseMap:
    """Keyword -> catalog-ordered schema items occurring under that clause."""

    entries: dict[str, tuple[str, ...]]

    def __getitem__(self, keyword: str) -> tuple[str, ...]:
        return self.entries[keyword]


@dataclass(frozen=True)
class ModelInput:
    """Token layout: [CLS] (utterance [SEP])* (slot-name = value [SEP])^m.

    Spans index token content only; separators and [CLS] sit between spans.
    """

    tokens: tuple[str, ...]
    utterance_spans: tuple[tuple[int, int], ...]
    slot_spans: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return len(self.tokens)


def iter_occurrences(ast: SqlAst) -> Iterator[tuple[str, str]]:
    """Yield (item_key, keyword) for every syntactic occurrence in the AST."""
    for item in ast.select:
        if not item.column.is_star():
            yield item.column.key, "SELECT"
    yield ast.from_clause.table, "FROM"
    for join in ast.from_clause.joins:
        yield join.table, "JOIN"
        yield join.left.key, "JOIN"
        yield join.right.key, "JOIN"
    if ast.where is not None:
        yield from _condition_occurrences(ast.where, "WHERE")
    for col in ast.group_by:
        yield col.key, "GROUP_BY"
    if ast.having is not None:
        yield from _condition_occurrences(ast.having, "HAVING")
    for item in ast.order_by:
        if not item.column.is_star():
            yield item.column.key, "ORDER_BY"
    if ast.set_op is not None:
        yield from iter_occurrences(ast.set_op[1])


def _condition_occurrences(cond: Condition, keyword: str) -> Iterator[tuple[str, str]]:
    if isinstance(cond, Comparison):
        if not cond.left.is_star():
            yield cond.left.key, keyword
        if isinstance(cond.right, SqlAst):
            # Subquery occurrences attribute to the subquery's own clauses.
            yield from iter_occurrences(cond.right)
    else:
        yield from _condition_occurrences(cond.left, keyword)
        yield from _condition_occurrences(cond.right, keyword)


def extract_schema_state(ast: SqlAst, catalog: SchemaCatalog) -> SchemaState:
    """Map every catalog slot to the clause keywords it occurs under."""
    found: dict[str, set[str]] = {}
    for item, keyword in iter_occurrences(ast):
        found.setdefault(item, set()).add(keyword)
    return SchemaState(
        tuple((slot, frozenset(found.get(slot, ()))) for slot in catalog.slots())
    )


def extract_clause_map(ast: SqlAst, catalog: SchemaCatalog) -> ClauseMap:
    """Inverse view: keyword -> items, items in catalog order."""
    state = extract_schema_state(ast, catalog)
    entries = {
        keyword: tuple(name for name, value in state.slots if keyword in value)
        for keyword in KEYWORDS
    }
    return ClauseMap(entries)


def tokenize_utterance(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def slot_tokens(name: str, value: frozenset[str]) -> list[str]:
    rendered = [k for k in KEYWORDS if k in value] or [NONE]
    return [name, "="] + rendered


def serialize_input(
    history: list[str],
    prev_state: SchemaState,
    catalog: SchemaCatalog,
    max_len: int = 256,
) -> ModelInput:
    """Build the model input for the current turn.

    history holds u_1..u_t (u_t last). The previous turn's schema state fills
    the slot section; truncation drops oldest utterances first and never
    touches slot spans.
    """
    if len(history) < 1:
        raise ValueError("history must contain at least the current utterance")
    if prev_state.slot_names() != catalog.slots():
        raise CatalogMismatchError("previous state does not match the catalog slots")

    slot_parts = [slot_tokens(name, value) for name, value in prev_state.slots]
    fixed = 1 + sum(len(p) + 1 for p in slot_parts)  # [CLS] + spans with [SEP]s
    if fixed > max_len:
        raise InputTooLongError(
            f"schema-state section needs {fixed} tokens, budget is {max_len}"
        )

    utterances = [tokenize_utterance(u) for u in history]
    budget = max_len - fixed
    kept: list[list[str]] = []
    for words in reversed(utterances):
        cost = len(words) + 1
        if cost > budget:
            break
        kept.append(words)
        budget -= cost
    kept.reverse()

    tokens: list[str] = [CLS]
    utt_spans: list[tuple[int, int]] = []
    for words in kept:
        start = len(tokens)
        tokens.extend(words)
        utt_spans.append((start, len(tokens)))
        tokens.append(SEP)
    slot_spans: list[tuple[int, int]] = []
    for part in slot_parts:
        start = len(tokens)
        tokens.extend(part)
        slot_spans.append((start, len(tokens)))
        tokens.append(SEP)
    return ModelInput(tuple(tokens), tuple(utt_spans), tuple(slot_spans))
