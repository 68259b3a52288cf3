"""Multi-turn conversation synthesis from single-turn seeds.

Follow-up templates pair an English question pattern (with typed slots) with
one operation from an 11-action edit grammar plus applicability constraints
over the previous query. Rollouts sample templates without replacement per
turn, apply the edit, and keep the turn only when the result parses and
resolves cleanly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, replace

from .catalog import SchemaCatalog
from .errors import SynthesisError
from .schema_state import (
    KEYWORDS,
    ClauseMap,
    SchemaState,
    extract_schema_state,
    iter_occurrences,
)
from .sql_ast import (
    STAR,
    BoolExpr,
    ColumnRef,
    Comparison,
    Condition,
    FromClause,
    Literal,
    OrderItem,
    SelectItem,
    SqlAst,
    and_join,
    conjuncts,
    is_conjunctive,
    render_sql,
)
from .parser import parse_sql

logger = logging.getLogger(__name__)

OPERATIONS = (
    "replace_select_column",
    "add_select_column",
    "add_where_predicate",
    "replace_where_value",
    "add_order_by",
    "add_group_by",
    "add_having",
    "add_limit",
    "drop_where_predicate",
    "switch_table",
    "nest_subquery",
)

# Typed slots each operation can fill; templates may use any subset.
OP_PARAMS: dict[str, frozenset[str]] = {
    "replace_select_column": frozenset({"COLUMN0"}),
    "add_select_column": frozenset({"COLUMN0"}),
    "add_where_predicate": frozenset({"COLUMN0", "VALUE0"}),
    "replace_where_value": frozenset({"COLUMN0", "VALUE0"}),
    "add_order_by": frozenset({"COLUMN0"}),
    "add_group_by": frozenset({"COLUMN0"}),
    "add_having": frozenset({"COLUMN0", "VALUE0", "AGG0"}),
    "add_limit": frozenset({"VALUE0"}),
    "drop_where_predicate": frozenset({"COLUMN0"}),
    "switch_table": frozenset({"TABLE0", "COLUMN0"}),
    "nest_subquery": frozenset({"COLUMN0"}),
}

# Constraints an operation cannot be shipped without.
_REQUIRED_CONSTRAINTS: dict[str, frozenset[str]] = {
    "replace_select_column": frozenset({"single_select_column"}),
    "add_where_predicate": frozenset(),
    "replace_where_value": frozenset({"has_literal_predicate"}),
    "add_order_by": frozenset({"no_order_by"}),
    "add_group_by": frozenset({"no_group_by"}),
    "add_having": frozenset({"has_group_by", "no_having"}),
    "add_limit": frozenset({"no_limit"}),
    "drop_where_predicate": frozenset({"has_where", "where_is_conjunctive"}),
    "nest_subquery": frozenset({"no_subquery"}),
}

# ClauseMap keywords an operation is allowed to change (single-edit audit).
EDIT_SIGNATURES: dict[str, frozenset[str]] = {
    "replace_select_column": frozenset({"SELECT"}),
    "add_select_column": frozenset({"SELECT"}),
    "add_where_predicate": frozenset({"WHERE"}),
    "replace_where_value": frozenset(),
    "add_order_by": frozenset({"ORDER_BY"}),
    "add_group_by": frozenset({"GROUP_BY"}),
    "add_having": frozenset({"HAVING"}),
    "add_limit": frozenset(),
    # Dropping a conjunct can take an embedded subquery (and its SELECT/FROM/
    # JOIN occurrences) with it.
    "drop_where_predicate": frozenset({"WHERE", "SELECT", "FROM", "JOIN"}),
    "switch_table": frozenset(KEYWORDS),
    "nest_subquery": frozenset({"WHERE", "SELECT", "FROM"}),
}

_SLOT_RE = re.compile(r"\[(COLUMN|TABLE|VALUE|AGG)(\d+)\]")

_NUMERIC_TYPES = ("number", "time")
_NUMBER_POOL = (1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40, 50, 75, 100,
                150, 200, 500, 1000, 1995, 2000, 2005, 2010)
_WORD_POOL = ("alpha", "beta", "gamma", "delta", "sierra", "nova", "zenith",
              "echo", "onyx", "aurora", "summit", "harbor")
_AGG_WORDS = {"SUM": "total", "AVG": "average", "MIN": "minimum", "MAX": "maximum"}


class TemplateError(ValueError):
    """A template file entry violates the template schema."""


@dataclass(frozen=True)
class FollowUpTemplate:
    template_id: str
    question_template: str
    operation: str
    constraints: tuple[str, ...]

    def slots_used(self) -> frozenset[str]:
        return frozenset(f"{kind}{num}" for kind, num in _SLOT_RE.findall(self.question_template))


@dataclass(frozen=True)
class SeedPair:
    utterance: str
    sql: SqlAst
    db_id: str


@dataclass(frozen=True)
class Turn:
    utterance: str
    sql: SqlAst
    state: SchemaState
    template_id: str | None = None


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    db_id: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValueError("a conversation needs at least one turn")
        if self.turns[0].template_id is not None:
            raise ValueError("turn 1 must not record a template")
        for idx, turn in enumerate(self.turns[1:], start=2):
            if turn.template_id is None:
                raise ValueError(f"turn {idx} must record its template")

    @property
    def turn_count(self) -> int:
        return len(self.turns)


@dataclass(frozen=True)
class SynthesisConfig:
    max_turns: int = 4
    rollout_attempts: int = 20
    rng_seed: int = 0
    target_conversation_count: int = 100

    def __post_init__(self) -> None:
        if self.max_turns < 2:
            raise ValueError("max_turns must be at least 2")
        if self.rollout_attempts < 1:
            raise ValueError("rollout_attempts must be at least 1")


# ---------------------------------------------------------------------------
# Constraint predicates
# ---------------------------------------------------------------------------


def _has_literal_predicate(ast: SqlAst) -> bool:
    return bool(_literal_comparisons(ast.where))


_PREDICATES = {
    "has_where": lambda ast, cm: ast.where is not None,
    "no_where": lambda ast, cm: ast.where is None,
    "has_group_by": lambda ast, cm: bool(ast.group_by),
    "no_group_by": lambda ast, cm: not ast.group_by,
    "has_having": lambda ast, cm: ast.having is not None,
    "no_having": lambda ast, cm: ast.having is None,
    "has_order_by": lambda ast, cm: bool(ast.order_by),
    "no_order_by": lambda ast, cm: not ast.order_by,
    "has_limit": lambda ast, cm: ast.limit is not None,
    "no_limit": lambda ast, cm: ast.limit is None,
    "single_select_column": lambda ast, cm: (
        len(ast.select) == 1
        and ast.select[0].agg is None
        and not ast.select[0].column.is_star()
    ),
    "select_without_star": lambda ast, cm: all(
        not i.column.is_star() for i in ast.select
    ),
    "no_aggregate_in_select": lambda ast, cm: all(i.agg is None for i in ast.select),
    "no_set_op": lambda ast, cm: ast.set_op is None,
    "no_subquery": lambda ast, cm: ast.depth() == 0,
    "where_is_conjunctive": lambda ast, cm: is_conjunctive(ast.where),
    "has_literal_predicate": lambda ast, cm: _has_literal_predicate(ast),
}


def check_constraints(template: FollowUpTemplate, prev: SqlAst) -> bool:
    """True when every constraint predicate holds on the previous query."""
    cm = clause_map_of(prev)
    return all(_PREDICATES[name](prev, cm) for name in template.constraints)


def clause_map_of(ast: SqlAst) -> ClauseMap:
    """ClauseMap without a catalog: occurrence order, used by predicates/audits."""
    found: dict[str, list[str]] = {k: [] for k in KEYWORDS}
    for item, keyword in iter_occurrences(ast):
        if item not in found[keyword]:
            found[keyword].append(item)
    return ClauseMap({k: tuple(v) for k, v in found.items()})


# ---------------------------------------------------------------------------
# Template loading
# ---------------------------------------------------------------------------


def load_templates(path: str) -> list[FollowUpTemplate]:
    """Load and validate a template pack; order preserved."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise TemplateError("template file must hold a JSON array")
    templates: list[FollowUpTemplate] = []
    seen: set[str] = set()
    for entry in data:
        tid = entry.get("template_id", "<missing id>")
        try:
            template = FollowUpTemplate(
                template_id=entry["template_id"],
                question_template=entry["question_template"],
                operation=entry["operation"],
                constraints=tuple(entry.get("constraints", ())),
            )
        except KeyError as exc:
            raise TemplateError(f"template {tid}: missing field {exc}") from exc
        _validate_template(template)
        if template.template_id in seen:
            raise TemplateError(f"template {template.template_id}: duplicate id")
        seen.add(template.template_id)
        templates.append(template)
    if not templates:
        logger.warning("template file %s is empty", path)
    return templates


def _validate_template(t: FollowUpTemplate) -> None:
    if t.operation not in OPERATIONS:
        raise TemplateError(f"template {t.template_id}: unknown operation '{t.operation}'")
    unused = t.slots_used() - OP_PARAMS[t.operation]
    if unused:
        raise TemplateError(
            f"template {t.template_id}: slot(s) {sorted(unused)} not consumed by "
            f"operation '{t.operation}'"
        )
    for name in t.constraints:
        if name not in _PREDICATES:
            raise TemplateError(f"template {t.template_id}: unknown constraint '{name}'")
    missing = _REQUIRED_CONSTRAINTS.get(t.operation, frozenset()) - set(t.constraints)
    if missing:
        raise TemplateError(
            f"template {t.template_id}: operation '{t.operation}' requires "
            f"constraint(s) {sorted(missing)}"
        )
    for name in t.constraints:
        flipped = ("no_" + name[4:]) if name.startswith("has_") else ("has_" + name[3:])
        if flipped in t.constraints:
            raise TemplateError(
                f"template {t.template_id}: contradictory constraints {name}/{flipped}"
            )


# ---------------------------------------------------------------------------
# Instantiation
# ---------------------------------------------------------------------------


def natural_name(identifier: str) -> str:
    """Human-readable rendering of a table/column identifier."""
    return identifier.split(".")[-1].replace("_", " ").lower()


def _scope_columns(prev: SqlAst, catalog: SchemaCatalog) -> list[ColumnRef]:
    cols: list[ColumnRef] = []
    for table_name in dict.fromkeys(prev.from_clause.tables()):
        table = catalog.find_table(table_name)
        if table is None:
            continue
        cols.extend(ColumnRef(table.name, c.name) for c in table.columns)
    return cols


def _numeric_scope_columns(prev: SqlAst, catalog: SchemaCatalog) -> list[ColumnRef]:
    numeric = [
        c
        for c in _scope_columns(prev, catalog)
        if catalog.column_type(c.table, c.column) in _NUMERIC_TYPES
    ]
    # Ids make poor measures; keep key columns only when nothing else is left.
    keys = {ref.lower() for ref in catalog.primary_keys}
    keys |= {ref.lower() for pair in catalog.foreign_keys for ref in pair}
    plain = [
        c for c in numeric
        if c.key.lower() not in keys and not c.column.lower().endswith("id")
    ]
    return plain or numeric


def _literal_comparisons(cond: Condition | None) -> list[Comparison]:
    if cond is None:
        return []
    if isinstance(cond, Comparison):
        if isinstance(cond.right, Literal) and cond.op != "BETWEEN":
            return [cond]
        return []
    return _literal_comparisons(cond.left) + _literal_comparisons(cond.right)


def _swap_comparison(cond: Condition, target: Comparison, new: Comparison) -> Condition:
    if cond is target:
        return new
    if isinstance(cond, BoolExpr):
        return BoolExpr(
            cond.op,
            _swap_comparison(cond.left, target, new),
            _swap_comparison(cond.right, target, new),
        )
    return cond


def _sample_number(rng: random.Random, avoid: str | None = None) -> Literal:
    pool = [n for n in _NUMBER_POOL if str(n) != avoid] or list(_NUMBER_POOL)
    return Literal(str(rng.choice(pool)))


def _sample_word(rng: random.Random, avoid: str | None = None) -> str:
    pool = [w for w in _WORD_POOL if f"'{w}'" != avoid] or list(_WORD_POOL)
    return rng.choice(pool)


def _and_extend(where: Condition | None, extra: Comparison) -> Condition:
    result = and_join(conjuncts(where) + [extra])
    assert result is not None
    return result


def _op_replace_select_column(template, prev, catalog, rng):
    current = prev.select[0].column
    cands = [c for c in _scope_columns(prev, catalog) if c.key != current.key]
    if not cands:
        return None
    col = rng.choice(cands)
    nxt = replace(prev, select=(SelectItem(None, col),))
    return {"COLUMN0": natural_name(col.key)}, nxt


def _op_add_select_column(template, prev, catalog, rng):
    selected = {i.column.key for i in prev.select}
    cands = [c for c in _scope_columns(prev, catalog) if c.key not in selected]
    if prev.group_by:
        grouped = {c.key for c in prev.group_by}
        numeric = {c.key for c in _numeric_scope_columns(prev, catalog)}
        cands = [c for c in cands if c.key in numeric and c.key not in grouped]
        if not cands:
            return None
        col = rng.choice(cands)
        item = SelectItem(rng.choice(("SUM", "AVG", "MIN", "MAX")), col)
    else:
        if not cands:
            return None
        col = rng.choice(cands)
        item = SelectItem(None, col)
    nxt = replace(prev, select=prev.select + (item,))
    return {"COLUMN0": natural_name(col.key)}, nxt


def _op_add_where_predicate(template, prev, catalog, rng):
    cands = _scope_columns(prev, catalog)
    if not cands:
        return None
    col = rng.choice(cands)
    ctype = catalog.column_type(col.table, col.column)
    # Templates that speak the value aloud ("... is [VALUE0]") imply equality;
    # wordings that leave the value unsaid may pick any operator.
    spoken = "VALUE0" in template.slots_used()
    if ctype in _NUMERIC_TYPES:
        op = "=" if spoken else rng.choice(("=", "!=", ">", "<", ">=", "<="))
        value = _sample_number(rng)
        display = value.text
    else:
        op = "=" if spoken else rng.choice(("=", "!=", "LIKE"))
        word = _sample_word(rng)
        value = Literal(f"'%{word}%'") if op == "LIKE" else Literal(f"'{word}'")
        display = word
    comp = Comparison(col, op, value)
    nxt = replace(prev, where=_and_extend(prev.where, comp))
    return {"COLUMN0": natural_name(col.key), "VALUE0": display}, nxt


def _op_replace_where_value(template, prev, catalog, rng):
    targets = _literal_comparisons(prev.where)
    if not targets:
        return None
    target = rng.choice(targets)
    old = target.right.text  # type: ignore[union-attr]
    if target.op == "LIKE":
        word = _sample_word(rng)
        value, display = Literal(f"'%{word}%'"), word
    elif old.startswith("'"):
        word = _sample_word(rng, avoid=old)
        value, display = Literal(f"'{word}'"), word
    else:
        value = _sample_number(rng, avoid=old)
        display = value.text
    new_where = _swap_comparison(prev.where, target, replace(target, right=value))
    nxt = replace(prev, where=new_where)
    return {"COLUMN0": natural_name(target.left.key), "VALUE0": display}, nxt


def _op_add_order_by(template, prev, catalog, rng):
    cands = _scope_columns(prev, catalog)
    if not cands:
        return None
    col = rng.choice(cands)
    direction = rng.choice(("ASC", "DESC"))
    nxt = replace(prev, order_by=(OrderItem(col, None, direction),))
    return {"COLUMN0": natural_name(col.key)}, nxt


def _op_add_group_by(template, prev, catalog, rng):
    plain = [i.column for i in prev.select if i.agg is None and not i.column.is_star()]
    if not plain:
        return None
    col = rng.choice(plain)
    nxt = replace(
        prev,
        select=prev.select + (SelectItem("COUNT", STAR),),
        group_by=(col,),
    )
    return {"COLUMN0": natural_name(col.key)}, nxt


def _op_add_having(template, prev, catalog, rng):
    value = Literal(str(rng.choice((1, 2, 3, 4, 5, 8, 10))))
    if "AGG0" in template.slots_used() or "COLUMN0" in template.slots_used():
        numeric = _numeric_scope_columns(prev, catalog)
        if not numeric:
            return None
        agg = rng.choice(("SUM", "AVG", "MIN", "MAX"))
        col = rng.choice(numeric)
        comp = Comparison(col, ">", value, agg)
        fills = {
            "AGG0": _AGG_WORDS[agg],
            "COLUMN0": natural_name(col.key),
            "VALUE0": value.text,
        }
    else:
        comp = Comparison(STAR, ">", value, "COUNT")
        fills = {"VALUE0": value.text}
    nxt = replace(prev, having=comp)
    return fills, nxt


def _op_add_limit(template, prev, catalog, rng):
    value = rng.choice((1, 2, 3, 4, 5, 8, 10))
    nxt = replace(prev, limit=value)
    return {"VALUE0": str(value)}, nxt


def _op_drop_where_predicate(template, prev, catalog, rng):
    parts = conjuncts(prev.where)
    if not parts:
        return None
    victim = rng.choice(parts)
    assert isinstance(victim, Comparison)
    remaining = [p for p in parts if p is not victim]
    nxt = replace(prev, where=and_join(remaining))
    return {"COLUMN0": natural_name(victim.left.key)}, nxt


def _op_switch_table(template, prev, catalog, rng):
    used = {t.lower() for t in prev.from_clause.tables()}
    others = [t for t in catalog.tables if t.name.lower() not in used]
    if not others:
        return None
    table = rng.choice(others)
    fills = {"TABLE0": natural_name(table.name)}
    if "COLUMN0" in template.slots_used():
        if not table.columns:
            return None
        col = rng.choice(table.columns)
        select = (SelectItem(None, ColumnRef(table.name, col.name)),)
        fills["COLUMN0"] = natural_name(col.name)
    else:
        select = (SelectItem(None, STAR),)
    nxt = SqlAst(select=select, from_clause=FromClause(table.name))
    return fills, nxt


def _op_nest_subquery(template, prev, catalog, rng):
    numeric = _numeric_scope_columns(prev, catalog)
    if not numeric:
        return None
    col = rng.choice(numeric)
    sub = SqlAst(
        select=(SelectItem("AVG", col),),
        from_clause=FromClause(col.table),
    )
    comp = Comparison(col, ">", sub)
    nxt = replace(prev, where=_and_extend(prev.where, comp))
    return {"COLUMN0": natural_name(col.key)}, nxt


_OP_FUNCS = {
    "replace_select_column": _op_replace_select_column,
    "add_select_column": _op_add_select_column,
    "add_where_predicate": _op_add_where_predicate,
    "replace_where_value": _op_replace_where_value,
    "add_order_by": _op_add_order_by,
    "add_group_by": _op_add_group_by,
    "add_having": _op_add_having,
    "add_limit": _op_add_limit,
    "drop_where_predicate": _op_drop_where_predicate,
    "switch_table": _op_switch_table,
    "nest_subquery": _op_nest_subquery,
}

_INSTANTIATE_TRIES = 8


def instantiate_template(
    template: FollowUpTemplate,
    prev: SqlAst,
    catalog: SchemaCatalog,
    rng: random.Random,
) -> tuple[str, SqlAst] | None:
    """Fill the template against the previous query; None when no assignment works."""
    if prev.set_op is not None:
        return None
    fn = _OP_FUNCS[template.operation]
    for _ in range(_INSTANTIATE_TRIES):
        got = fn(template, prev, catalog, rng)
        if got is None:
            return None
        fills, nxt = got
        try:
            if parse_sql(render_sql(nxt), catalog) != nxt:
                continue
        except Exception:
            continue
        utterance = template.question_template
        for slot, text in fills.items():
            utterance = utterance.replace(f"[{slot}]", text)
        return utterance, nxt
    return None


# ---------------------------------------------------------------------------
# Rollout and corpus synthesis
# ---------------------------------------------------------------------------


def seed_question(ast: SqlAst, catalog: SchemaCatalog) -> str:
    """Canned first-turn question filled from the seed SQL."""
    table = natural_name(ast.from_clause.table)
    first = ast.select[0]
    if first.agg == "COUNT":
        return f"How many {table} are there?"
    cols = [natural_name(i.column.key) for i in ast.select if not i.column.is_star()]
    if cols:
        return f"Show me the {' and the '.join(cols)} of the {table}."
    return f"Show me all the {table}."


def rollout_conversation(
    seed: SeedPair,
    templates: list[FollowUpTemplate],
    catalog: SchemaCatalog,
    cfg: SynthesisConfig,
    rng: random.Random,
    conversation_id: str = "c000000",
) -> Conversation:
    """Expand one seed into up to cfg.max_turns turns; stops when no template fits."""
    if not templates:
        raise ValueError("template set is empty")
    turns = [
        Turn(seed.utterance, seed.sql, extract_schema_state(seed.sql, catalog))
    ]
    while len(turns) < cfg.max_turns:
        prev = turns[-1].sql
        order = rng.sample(range(len(templates)), min(cfg.rollout_attempts, len(templates)))
        produced = None
        for idx in order:
            template = templates[idx]
            if not check_constraints(template, prev):
                continue
            got = instantiate_template(template, prev, catalog, rng)
            if got is not None:
                produced = (template, got)
                break
        if produced is None:
            break
        template, (utterance, nxt) = produced
        turns.append(
            Turn(utterance, nxt, extract_schema_state(nxt, catalog), template.template_id)
        )
    return Conversation(conversation_id, catalog.db_id, tuple(turns))


def derive_rng(rng_seed: int, index: int) -> random.Random:
    """Stable per-attempt rng stream (platform-independent)."""
    digest = hashlib.sha256(f"{rng_seed}:{index}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def synthesize_corpus(
    seeds: list[SeedPair],
    templates: list[FollowUpTemplate],
    catalogs: dict[str, SchemaCatalog],
    cfg: SynthesisConfig,
) -> list[Conversation]:
    """Produce exactly cfg.target_conversation_count conversations with T >= 2.

    Seeds are cycled; each attempt gets its own derived rng stream so output
    does not depend on scheduling. Raises SynthesisError when the yield of
    valid conversations drops below 50%.
    """
    if not seeds:
        raise ValueError("seed list is empty")
    for seed in seeds:
        if seed.db_id not in catalogs:
            raise ValueError(f"seed references unknown db_id '{seed.db_id}'")
    target = cfg.target_conversation_count
    max_attempts = max(2 * target, target + 8)
    kept: list[Conversation] = []
    attempt = 0
    while len(kept) < target:
        if attempt >= max_attempts:
            raise SynthesisError(
                f"yield too low: {len(kept)}/{attempt} valid conversations"
            )
        seed = seeds[attempt % len(seeds)]
        catalog = catalogs[seed.db_id]
        conv = rollout_conversation(
            seed, templates, catalog, cfg, derive_rng(cfg.rng_seed, attempt),
            conversation_id=f"c{attempt:06d}",
        )
        attempt += 1
        if conv.turn_count >= 2:
            audit_conversation(conv, {t.template_id: t for t in templates}, catalog)
            kept.append(conv)
    return kept


def audit_conversation(
    conv: Conversation,
    templates_by_id: dict[str, FollowUpTemplate],
    catalog: SchemaCatalog,
) -> None:
    """Re-validate parse, constraints, and single-edit signature; raises on failure."""
    for idx, turn in enumerate(conv.turns, start=1):
        if parse_sql(render_sql(turn.sql), catalog) != turn.sql:
            raise SynthesisError(f"{conv.conversation_id} turn {idx}: round-trip mismatch")
        if extract_schema_state(turn.sql, catalog) != turn.state:
            raise SynthesisError(f"{conv.conversation_id} turn {idx}: stale schema state")
    for idx in range(1, len(conv.turns)):
        prev, cur = conv.turns[idx - 1], conv.turns[idx]
        template = templates_by_id.get(cur.template_id or "")
        if template is None:
            raise SynthesisError(
                f"{conv.conversation_id} turn {idx + 1}: unknown template {cur.template_id}"
            )
        if not check_constraints(template, prev.sql):
            raise SynthesisError(
                f"{conv.conversation_id} turn {idx + 1}: constraints fail re-audit"
            )
        cm_prev = clause_map_of(prev.sql)
        cm_cur = clause_map_of(cur.sql)
        changed = {k for k in KEYWORDS if cm_prev[k] != cm_cur[k]}
        allowed = EDIT_SIGNATURES[template.operation]
        if not changed <= allowed:
            raise SynthesisError(
                f"{conv.conversation_id} turn {idx + 1}: edit touched {sorted(changed - allowed)} "
                f"outside the {template.operation} signature"
            )
