"""Immutable AST for the Spider-style SQL subset, plus the canonical renderer.

Canonical form: upper-case keywords, aliases resolved away, every column
qualified as table.column, explicit ASC/DESC, literals verbatim. The
renderer and parser are exact inverses on valid ASTs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

AGG_OPS = ("COUNT", "SUM", "AVG", "MIN", "MAX")
COMPARE_OPS = ("=", "!=", "<", ">", "<=", ">=", "LIKE", "IN", "NOT IN", "BETWEEN")
SET_OPS = ("INTERSECT", "UNION", "EXCEPT")


@dataclass(frozen=True)
class ColumnRef:
    table: str
    column: str

    def is_star(self) -> bool:
        return self.column == "*"

    @property
    def key(self) -> str:
        return "*" if self.is_star() else f"{self.table}.{self.column}"


STAR = ColumnRef("", "*")


@dataclass(frozen=True)
class Literal:
    text: str  # verbatim lexeme, quotes included for strings


@dataclass(frozen=True)
class SelectItem:
    agg: str | None
    column: ColumnRef
    distinct: bool = False


@dataclass(frozen=True)
class Join:
    table: str
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class FromClause:
    table: str
    joins: tuple[Join, ...] = ()

    def tables(self) -> tuple[str, ...]:
        return (self.table,) + tuple(j.table for j in self.joins)


@dataclass(frozen=True)
class Comparison:
    left: ColumnRef
    op: str
    right: Union[Literal, tuple[Literal, ...], "SqlAst"]
    agg: str | None = None  # aggregate applied to the left side (HAVING)


@dataclass(frozen=True)
class BoolExpr:
    op: str  # AND | OR
    left: "Condition"
    right: "Condition"


Condition = Union[Comparison, BoolExpr]


@dataclass(frozen=True)
class OrderItem:
    column: ColumnRef
    agg: str | None = None
    direction: str = "ASC"


@dataclass(frozen=True)
class SqlAst:
    select: tuple[SelectItem, ...]
    from_clause: FromClause
    where: Condition | None = None
    group_by: tuple[ColumnRef, ...] = ()
    having: Condition | None = None
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None
    set_op: tuple[str, "SqlAst"] | None = None

    def depth(self) -> int:
        """Maximum subquery nesting depth (0 for a flat query)."""
        depths = [0]
        for cond in (self.where, self.having):
            if cond is not None:
                depths.append(_cond_depth(cond))
        if self.set_op is not None:
            depths.append(self.set_op[1].depth())
        return max(depths)

    def subqueries(self) -> list["SqlAst"]:
        """All directly nested subqueries (WHERE/HAVING), excluding set-op branches."""
        out: list[SqlAst] = []
        for cond in (self.where, self.having):
            if cond is not None:
                _collect_subqueries(cond, out)
        return out


def _cond_depth(cond: Condition) -> int:
    if isinstance(cond, BoolExpr):
        return max(_cond_depth(cond.left), _cond_depth(cond.right))
    if isinstance(cond.right, SqlAst):
        return 1 + cond.right.depth()
    return 0


def _collect_subqueries(cond: Condition, out: list[SqlAst]) -> None:
    if isinstance(cond, BoolExpr):
        _collect_subqueries(cond.left, out)
        _collect_subqueries(cond.right, out)
    elif isinstance(cond.right, SqlAst):
        out.append(cond.right)


def conjuncts(cond: Condition | None) -> list[Condition]:
    """Flatten a pure AND-chain into its leaves; [] for None."""
    if cond is None:
        return []
    if isinstance(cond, BoolExpr) and cond.op == "AND":
        return conjuncts(cond.left) + conjuncts(cond.right)
    return [cond]


def and_join(parts: list[Condition]) -> Condition | None:
    """Rebuild a left-associated AND-chain from leaves."""
    if not parts:
        return None
    out = parts[0]
    for p in parts[1:]:
        out = BoolExpr("AND", out, p)
    return out


def is_conjunctive(cond: Condition | None) -> bool:
    """True when the condition is an AND-chain of comparisons (or absent)."""
    if cond is None:
        return True
    if isinstance(cond, Comparison):
        return True
    return cond.op == "AND" and is_conjunctive(cond.left) and is_conjunctive(cond.right)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PREC = {"OR": 1, "AND": 2}


def _render_select_item(item: SelectItem) -> str:
    col = item.column.key
    if item.agg:
        inner = f"DISTINCT {col}" if item.distinct else col
        return f"{item.agg}({inner})"
    return col


def _render_value(value: Union[Literal, tuple[Literal, ...], SqlAst]) -> str:
    if isinstance(value, Literal):
        return value.text
    if isinstance(value, SqlAst):
        return f"({render_sql(value)})"
    return "(" + ", ".join(v.text for v in value) + ")"


def _render_comparison(cmp: Comparison) -> str:
    left = f"{cmp.agg}({cmp.left.key})" if cmp.agg else cmp.left.key
    if cmp.op == "BETWEEN":
        lo, hi = cmp.right  # type: ignore[misc]
        return f"{left} BETWEEN {lo.text} AND {hi.text}"
    return f"{left} {cmp.op} {_render_value(cmp.right)}"


def _render_condition(cond: Condition, min_prec: int = 0) -> str:
    if isinstance(cond, Comparison):
        return _render_comparison(cond)
    prec = _PREC[cond.op]
    # Left-associated chains print flat; anything else gets parentheses so
    # the parse tree survives a round trip.
    text = (
        f"{_render_condition(cond.left, prec)} {cond.op} "
        f"{_render_condition(cond.right, prec + 1)}"
    )
    return f"({text})" if prec < min_prec else text


def render_sql(ast: SqlAst) -> str:
    """Serialize an AST to canonical SQL text."""
    parts = ["SELECT "]
    if ast.select and ast.select[0].distinct and not ast.select[0].agg:
        parts.append("DISTINCT ")
    parts.append(", ".join(_render_select_item(i) for i in ast.select))
    parts.append(f" FROM {ast.from_clause.table}")
    for join in ast.from_clause.joins:
        parts.append(f" JOIN {join.table} ON {join.left.key} = {join.right.key}")
    if ast.where is not None:
        parts.append(f" WHERE {_render_condition(ast.where)}")
    if ast.group_by:
        parts.append(" GROUP BY " + ", ".join(c.key for c in ast.group_by))
    if ast.having is not None:
        parts.append(f" HAVING {_render_condition(ast.having)}")
    if ast.order_by:
        rendered = []
        for item in ast.order_by:
            base = f"{item.agg}({item.column.key})" if item.agg else item.column.key
            rendered.append(f"{base} {item.direction}")
        parts.append(" ORDER BY " + ", ".join(rendered))
    if ast.limit is not None:
        parts.append(f" LIMIT {ast.limit}")
    if ast.set_op is not None:
        op, rhs = ast.set_op
        parts.append(f" {op} {render_sql(rhs)}")
    return "".join(parts)
