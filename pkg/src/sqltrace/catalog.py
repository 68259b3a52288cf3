"""Database schema catalogs in the Spider tables.json format.

A catalog defines the slot universe for schema-state tracking: every table
name followed by every column name (grouped per table), all in catalog
order. The slot count m = N tables + total columns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import ParseError


@dataclass(frozen=True)
class ColumnDef:
    name: str
    col_type: str  # Spider types: number, text, time, boolean, others


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]


@dataclass(frozen=True)
class SchemaCatalog:
    db_id: str
    tables: tuple[TableDef, ...]
    primary_keys: frozenset[str] = frozenset()  # "table.column"
    foreign_keys: frozenset[tuple[str, str]] = frozenset()
    _slot_index: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        seen_tables: dict[str, str] = {}
        for table in self.tables:
            low = table.name.lower()
            if low in seen_tables:
                raise ParseError("resolution", 0, f"duplicate table name '{table.name}'")
            seen_tables[low] = table.name
            seen_cols: set[str] = set()
            for col in table.columns:
                cl = col.name.lower()
                if cl in seen_cols:
                    raise ParseError(
                        "resolution", 0, f"duplicate column '{col.name}' in table '{table.name}'"
                    )
                seen_cols.add(cl)
        known = {
            f"{t.name}.{c.name}".lower() for t in self.tables for c in t.columns
        }
        for ref in self.primary_keys:
            if ref.lower() not in known:
                raise ParseError("resolution", 0, f"primary key '{ref}' does not resolve")
        for src, dst in self.foreign_keys:
            for ref in (src, dst):
                if ref.lower() not in known:
                    raise ParseError("resolution", 0, f"foreign key '{ref}' does not resolve")
        object.__setattr__(
            self, "_slot_index", {slot: i for i, slot in enumerate(self.slots())}
        )

    def slots(self) -> tuple[str, ...]:
        """All m slot ids: every table name, then every column per table."""
        names = [t.name for t in self.tables]
        names += [f"{t.name}.{c.name}" for t in self.tables for c in t.columns]
        return tuple(names)

    def slot_count(self) -> int:
        return len(self.tables) + sum(len(t.columns) for t in self.tables)

    def find_table(self, name: str) -> TableDef | None:
        low = name.lower()
        for t in self.tables:
            if t.name.lower() == low:
                return t
        return None

    def find_column(self, table: str, column: str) -> ColumnDef | None:
        t = self.find_table(table)
        if t is None:
            return None
        low = column.lower()
        for c in t.columns:
            if c.name.lower() == low:
                return c
        return None

    def column_type(self, table: str, column: str) -> str | None:
        c = self.find_column(table, column)
        return c.col_type if c else None


def catalog_from_spider(entry: dict[str, Any]) -> SchemaCatalog:
    """Build a catalog from one Spider tables.json entry.

    Accepts the exact Spider field names; the leading (-1, "*") column row
    is skipped and key indices are mapped back through it.
    """
    try:
        db_id = entry["db_id"]
        table_names = entry["table_names_original"]
        column_names = entry["column_names_original"]
        column_types = entry.get("column_types", ["others"] * len(column_names))
    except KeyError as exc:
        raise ParseError("resolution", 0, f"catalog entry missing field {exc}") from exc

    cols_per_table: dict[int, list[ColumnDef]] = {i: [] for i in range(len(table_names))}
    col_refs: list[str | None] = []  # index-aligned with column_names
    for idx, (tab_idx, col_name) in enumerate(column_names):
        if tab_idx < 0:
            col_refs.append(None)  # the "*" pseudo-column
            continue
        if tab_idx >= len(table_names):
            raise ParseError("resolution", 0, f"column '{col_name}' references missing table index {tab_idx}")
        ctype = column_types[idx] if idx < len(column_types) else "others"
        cols_per_table[tab_idx].append(ColumnDef(col_name, ctype))
        col_refs.append(f"{table_names[tab_idx]}.{col_name}")

    def ref_at(i: int) -> str:
        if not isinstance(i, int) or i < 0 or i >= len(col_refs) or col_refs[i] is None:
            raise ParseError("resolution", 0, f"key references missing column index {i}")
        return col_refs[i]  # type: ignore[return-value]

    primary = frozenset(ref_at(i) for i in entry.get("primary_keys", []))
    foreign = frozenset(
        (ref_at(a), ref_at(b)) for a, b in entry.get("foreign_keys", [])
    )
    tables = tuple(
        TableDef(name, tuple(cols_per_table[i])) for i, name in enumerate(table_names)
    )
    return SchemaCatalog(db_id, tables, primary, foreign)


def validate_catalog(raw: str | dict[str, Any]) -> SchemaCatalog:
    """Parse and validate one catalog from JSON text (or a decoded entry).

    Raises ParseError(kind="resolution") naming the first violated
    constraint; JSON syntax problems surface as kind="lex".
    """
    if isinstance(raw, str):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError("lex", exc.pos, f"invalid catalog JSON: {exc.msg}") from exc
    else:
        data = raw
    if isinstance(data, list):
        if len(data) != 1:
            raise ParseError("resolution", 0, "expected a single catalog entry")
        data = data[0]
    if not isinstance(data, dict):
        raise ParseError("resolution", 0, "catalog entry must be a JSON object")
    return catalog_from_spider(data)


def load_catalogs(path: str) -> dict[str, SchemaCatalog]:
    """Load a Spider tables.json file (array or single entry) keyed by db_id."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    entries = data if isinstance(data, list) else [data]
    out: dict[str, SchemaCatalog] = {}
    for entry in entries:
        cat = catalog_from_spider(entry)
        out[cat.db_id] = cat
    return out
