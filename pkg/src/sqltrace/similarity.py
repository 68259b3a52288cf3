"""SQL similarity: slot-wise Jaccard, Weisfeiler-Lehman subtree kernel, blend.

The semantic metric averages Jaccard overlap of slot keyword-sets over the
slots non-empty in at least one query. The structural metric parses each
query into a labeled tree and applies the WL subtree kernel with cosine
normalization. The blend weights the two by an impact factor in [0, 1].
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .catalog import SchemaCatalog
from .schema_state import CatalogMismatchError, SchemaState, extract_schema_state
from .sql_ast import BoolExpr, Comparison, Condition, Literal, SqlAst

TREE_CLAUSE_ORDER = ("SELECT", "FROM", "WHERE", "GROUP_BY", "HAVING", "ORDER_BY", "LIMIT")

MAX_WL_ITERATIONS = 8


@dataclass(frozen=True)
class TreeNode:
    label: str
    children: tuple["TreeNode", ...] = ()

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


@dataclass(frozen=True)
class KernelConfig:
    iterations: int = 3

    def __post_init__(self) -> None:
        if not 0 <= self.iterations <= MAX_WL_ITERATIONS:
            raise ValueError(f"iterations must be in [0, {MAX_WL_ITERATIONS}]")


@dataclass(frozen=True)
class SimilarityConfig:
    lam: float = 0.5  # impact factor on the semantic term
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")


@dataclass(frozen=True)
class WeightMatrix:
    conversation_id: str
    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.rows)
        for x, row in enumerate(self.rows):
            if len(row) != n:
                raise ValueError("weight matrix must be square")
            if row[x] != 0.0:
                raise ValueError("weight matrix diagonal must be zero")
            if any(w < 0.0 for w in row):
                raise ValueError("weights must be non-negative")

    @property
    def turns(self) -> int:
        return len(self.rows)


def semantic_similarity(state_x: SchemaState, state_y: SchemaState) -> float:
    """Average slot-wise Jaccard over slots non-empty on at least one side."""
    if state_x.slot_names() != state_y.slot_names():
        raise CatalogMismatchError("states are drawn from different catalogs")
    total = 0.0
    counted = 0
    for (_, vx), (_, vy) in zip(state_x.slots, state_y.slots):
        union = vx | vy
        if not union:
            continue
        counted += 1
        total += len(vx & vy) / len(union)
    return total / counted if counted else 0.0


# ---------------------------------------------------------------------------
# SQL trees
# ---------------------------------------------------------------------------


def _value_node(value) -> TreeNode:
    if isinstance(value, Literal):
        return TreeNode("VAL")
    if isinstance(value, SqlAst):
        return build_sql_tree(value)
    return TreeNode("VAL_LIST", tuple(TreeNode("VAL") for _ in value))


def _condition_node(cond: Condition) -> TreeNode:
    if isinstance(cond, BoolExpr):
        return TreeNode(cond.op, (_condition_node(cond.left), _condition_node(cond.right)))
    left = TreeNode(cond.left.key)
    if cond.agg:
        left = TreeNode(cond.agg, (left,))
    if cond.op == "BETWEEN":
        lo_hi = tuple(TreeNode("VAL") for _ in cond.right)  # type: ignore[union-attr]
        return TreeNode("BETWEEN", (left,) + lo_hi)
    return TreeNode(cond.op, (left, _value_node(cond.right)))


def build_sql_tree(ast: SqlAst) -> TreeNode:
    """Deterministic labeled tree: SQL root, clause children in fixed order."""
    children: list[TreeNode] = []

    select_kids = []
    for item in ast.select:
        node = TreeNode(item.column.key)
        if item.distinct:
            node = TreeNode("DISTINCT", (node,))
        if item.agg:
            node = TreeNode(item.agg, (node,))
        select_kids.append(node)
    children.append(TreeNode("SELECT", tuple(select_kids)))

    from_kids: list[TreeNode] = [TreeNode(ast.from_clause.table)]
    for join in ast.from_clause.joins:
        cond = TreeNode("=", (TreeNode(join.left.key), TreeNode(join.right.key)))
        from_kids.append(TreeNode("JOIN", (TreeNode(join.table), cond)))
    children.append(TreeNode("FROM", tuple(from_kids)))

    if ast.where is not None:
        children.append(TreeNode("WHERE", (_condition_node(ast.where),)))
    if ast.group_by:
        children.append(
            TreeNode("GROUP_BY", tuple(TreeNode(c.key) for c in ast.group_by))
        )
    if ast.having is not None:
        children.append(TreeNode("HAVING", (_condition_node(ast.having),)))
    if ast.order_by:
        order_kids = []
        for item in ast.order_by:
            node = TreeNode(item.column.key)
            if item.agg:
                node = TreeNode(item.agg, (node,))
            order_kids.append(TreeNode(item.direction, (node,)))
        children.append(TreeNode("ORDER_BY", tuple(order_kids)))
    if ast.limit is not None:
        children.append(TreeNode("LIMIT", (TreeNode("VAL"),)))
    if ast.set_op is not None:
        op, rhs = ast.set_op
        children.append(TreeNode(op, (build_sql_tree(rhs),)))
    return TreeNode("SQL", tuple(children))


# ---------------------------------------------------------------------------
# Weisfeiler-Lehman subtree kernel
# ---------------------------------------------------------------------------


def _flatten(tree: TreeNode) -> tuple[list[str], list[list[int]]]:
    """Pre-order node labels plus child index lists."""
    labels: list[str] = []
    children: list[list[int]] = []

    def visit(node: TreeNode) -> int:
        idx = len(labels)
        labels.append(node.label)
        children.append([])
        for child in node.children:
            children[idx].append(visit(child))
        return idx

    visit(tree)
    return labels, children


def wl_kernel(tree_x: TreeNode, tree_y: TreeNode, cfg: KernelConfig | None = None) -> int:
    """Sum over iterations 0..h of matching-label pair counts.

    Each iteration relabels a node with an id for (own label, sorted child
    labels); the per-iteration base kernel is the dot product of label
    histograms. Label compression uses an injective dictionary shared by
    both trees, so counts are exact.
    """
    cfg = cfg or KernelConfig()
    labels_x, kids_x = _flatten(tree_x)
    labels_y, kids_y = _flatten(tree_y)

    table: dict[object, int] = {}

    def compress(key: object) -> int:
        if key not in table:
            table[key] = len(table)
        return table[key]

    ids_x = [compress(("base", lab)) for lab in labels_x]
    ids_y = [compress(("base", lab)) for lab in labels_y]

    total = _histogram_dot(ids_x, ids_y)
    for _ in range(cfg.iterations):
        ids_x = [
            compress((ids_x[i], tuple(sorted(ids_x[c] for c in kids_x[i]))))
            for i in range(len(ids_x))
        ]
        ids_y = [
            compress((ids_y[i], tuple(sorted(ids_y[c] for c in kids_y[i]))))
            for i in range(len(ids_y))
        ]
        total += _histogram_dot(ids_x, ids_y)
    return total


def _histogram_dot(ids_x: list[int], ids_y: list[int]) -> int:
    cx, cy = Counter(ids_x), Counter(ids_y)
    return sum(count * cy[label] for label, count in cx.items() if label in cy)


def structural_similarity(
    tree_x: TreeNode, tree_y: TreeNode, cfg: KernelConfig | None = None
) -> float:
    """Cosine-normalized WL kernel; 1.0 for identical trees."""
    cfg = cfg or KernelConfig()
    cross = wl_kernel(tree_x, tree_y, cfg)
    if cross == 0:
        return 0.0
    self_x = wl_kernel(tree_x, tree_x, cfg)
    self_y = wl_kernel(tree_y, tree_y, cfg)
    return cross / (self_x * self_y) ** 0.5


def combined_similarity(
    o_x: SqlAst,
    o_y: SqlAst,
    catalog: SchemaCatalog,
    cfg: SimilarityConfig | None = None,
) -> float:
    """Blend: lambda * semantic + (1 - lambda) * structural."""
    cfg = cfg or SimilarityConfig()
    semantic = semantic_similarity(
        extract_schema_state(o_x, catalog), extract_schema_state(o_y, catalog)
    )
    structural = structural_similarity(build_sql_tree(o_x), build_sql_tree(o_y), cfg.kernel)
    return cfg.lam * semantic + (1.0 - cfg.lam) * structural


def pairwise_weights(
    conversation_id: str,
    asts: list[SqlAst],
    catalog: SchemaCatalog,
    cfg: SimilarityConfig | None = None,
) -> WeightMatrix:
    """Row-normalized similarity weights over the turns of one conversation.

    Row x distributes mass over the other turns proportionally to the
    blended SQL similarity; an all-zero row falls back to uniform.
    """
    if len(asts) < 2:
        raise ValueError("a conversation needs at least 2 turns for weights")
    cfg = cfg or SimilarityConfig()
    n = len(asts)
    states = [extract_schema_state(a, catalog) for a in asts]
    trees = [build_sql_tree(a) for a in asts]

    sims = [[0.0] * n for _ in range(n)]
    for x in range(n):
        for p in range(x + 1, n):
            value = cfg.lam * semantic_similarity(states[x], states[p]) + (
                1.0 - cfg.lam
            ) * structural_similarity(trees[x], trees[p], cfg.kernel)
            sims[x][p] = sims[p][x] = value

    rows = []
    for x in range(n):
        mass = sum(sims[x])
        if mass > 0.0:
            rows.append(tuple(sims[x][p] / mass for p in range(n)))
        else:
            uniform = 1.0 / (n - 1)
            rows.append(tuple(0.0 if p == x else uniform for p in range(n)))
    return WeightMatrix(conversation_id, tuple(rows))


def contrastive_weights(
    conversation, catalog: SchemaCatalog, cfg: SimilarityConfig | None = None
) -> WeightMatrix:
    """Weight matrix for a synthesized conversation (duck-typed turns)."""
    return pairwise_weights(
        conversation.conversation_id,
        [turn.sql for turn in conversation.turns],
        catalog,
        cfg,
    )
