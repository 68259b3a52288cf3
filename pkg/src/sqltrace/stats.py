"""Corpus statistics: turn/template/difficulty histograms and input lengths.

Works from the corpus file alone: the stored schema-state slot lists give
back the slot universe, so a minimal catalog can be reconstructed for
parsing and serialization without the original tables file.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import ColumnDef, SchemaCatalog, TableDef
from .parser import parse_sql
from .schema_state import SchemaState, serialize_input
from .sql_ast import BoolExpr, Comparison, Condition, SqlAst

HARDNESS_LEVELS = ("easy", "medium", "hard", "extra")


@dataclass(frozen=True)
class CorpusStats:
    conversation_count: int
    turn_histogram: dict[int, int]
    template_usage: dict[str, int]
    mean_input_length: float
    max_input_length: int
    difficulty_histogram: dict[str, int]

    def to_json_obj(self) -> dict:
        return {
            "conversation_count": self.conversation_count,
            "turn_histogram": {str(k): v for k, v in sorted(self.turn_histogram.items())},
            "template_usage": dict(sorted(self.template_usage.items())),
            "mean_input_length": round(self.mean_input_length, 2),
            "max_input_length": self.max_input_length,
            "difficulty_histogram": {
                level: self.difficulty_histogram.get(level, 0) for level in HARDNESS_LEVELS
            },
        }


# ---------------------------------------------------------------------------
# Spider-style hardness
# ---------------------------------------------------------------------------


def _conds(cond: Condition | None) -> list[Comparison]:
    if cond is None:
        return []
    if isinstance(cond, Comparison):
        return [cond]
    return _conds(cond.left) + _conds(cond.right)


def _count_or(cond: Condition | None) -> int:
    if cond is None or isinstance(cond, Comparison):
        return 0
    own = 1 if cond.op == "OR" else 0
    return own + _count_or(cond.left) + _count_or(cond.right)


def _agg_count(ast: SqlAst) -> int:
    count = sum(1 for i in ast.select if i.agg)
    count += sum(1 for c in _conds(ast.where) + _conds(ast.having) if c.agg)
    count += sum(1 for o in ast.order_by if o.agg)
    return count


def _component1(ast: SqlAst) -> int:
    count = 0
    count += 1 if ast.where is not None else 0
    count += 1 if ast.group_by else 0
    count += 1 if ast.order_by else 0
    count += 1 if ast.limit is not None else 0
    count += len(ast.from_clause.joins)
    count += _count_or(ast.where) + _count_or(ast.having)
    count += sum(
        1 for c in _conds(ast.where) + _conds(ast.having) if c.op == "LIKE"
    )
    return count


def _component2(ast: SqlAst) -> int:
    count = len(ast.subqueries())
    if ast.set_op is not None:
        count += 1
    return count


def _others(ast: SqlAst) -> int:
    count = 0
    if _agg_count(ast) > 1:
        count += 1
    if len(ast.select) > 1:
        count += 1
    if len(_conds(ast.where)) > 1:
        count += 1
    if len(ast.group_by) > 1:
        count += 1
    return count


def hardness(ast: SqlAst) -> str:
    """Spider difficulty bucket from clause/component counting."""
    comp1, comp2, others = _component1(ast), _component2(ast), _others(ast)
    if comp1 <= 1 and others == 0 and comp2 == 0:
        return "easy"
    if (others <= 2 and comp1 <= 1 and comp2 == 0) or (
        comp1 <= 2 and others < 2 and comp2 == 0
    ):
        return "medium"
    if (
        (others > 2 and comp1 <= 2 and comp2 == 0)
        or (2 < comp1 <= 3 and others <= 2 and comp2 == 0)
        or (comp1 <= 1 and others == 0 and comp2 <= 1)
    ):
        return "hard"
    return "extra"


# ---------------------------------------------------------------------------
# Corpus-level aggregation
# ---------------------------------------------------------------------------


def catalog_from_state_obj(db_id: str, state_obj: dict) -> SchemaCatalog:
    """Minimal catalog rebuilt from a stored schema-state slot list."""
    tables: list[str] = []
    columns: dict[str, list[str]] = {}
    for slot in state_obj["slots"]:
        name = slot["name"]
        if "." in name:
            table, column = name.split(".", 1)
            columns.setdefault(table, []).append(column)
        else:
            tables.append(name)
            columns.setdefault(name, [])
    return SchemaCatalog(
        db_id,
        tuple(
            TableDef(t, tuple(ColumnDef(c, "others") for c in columns[t])) for t in tables
        ),
    )


def corpus_stats(corpus_objs: list[dict], max_len: int = 256) -> CorpusStats:
    turn_histogram: dict[int, int] = {}
    template_usage: dict[str, int] = {}
    difficulty: dict[str, int] = {}
    lengths: list[int] = []

    for obj in corpus_objs:
        turns = obj["turns"]
        turn_histogram[len(turns)] = turn_histogram.get(len(turns), 0) + 1
        catalog = catalog_from_state_obj(obj["db_id"], turns[0]["state"])
        history: list[str] = []
        prev_state = SchemaState.all_none(catalog)
        for turn in turns:
            tid = turn.get("template_id")
            if tid:
                template_usage[tid] = template_usage.get(tid, 0) + 1
            ast = parse_sql(turn["sql"], catalog)
            level = hardness(ast)
            difficulty[level] = difficulty.get(level, 0) + 1
            history.append(turn["utterance"])
            model_input = serialize_input(history, prev_state, catalog, max_len)
            lengths.append(model_input.length)
            prev_state = SchemaState.from_json_obj(turn["state"])

    return CorpusStats(
        conversation_count=len(corpus_objs),
        turn_histogram=turn_histogram,
        template_usage=template_usage,
        mean_input_length=sum(lengths) / len(lengths) if lengths else 0.0,
        max_input_length=max(lengths) if lengths else 0,
        difficulty_histogram=difficulty,
    )
