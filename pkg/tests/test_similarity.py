from __future__ import annotations

import random

import pytest

from sqltrace.parser import parse_sql
from sqltrace.schema_state import CatalogMismatchError, extract_schema_state
from sqltrace.similarity import (
    KernelConfig,
    SimilarityConfig,
    TreeNode,
    WeightMatrix,
    build_sql_tree,
    combined_similarity,
    pairwise_weights,
    semantic_similarity,
    structural_similarity,
    wl_kernel,
)
from sqltrace.sql_ast import SqlAst

from oracles import naive_wl_kernel, random_ast

WORKED_X = "SELECT name FROM cars"
WORKED_Y = "SELECT name FROM cars WHERE year > 2000"


@pytest.fixture
def worked_pair(cars_catalog):
    x = parse_sql(WORKED_X, cars_catalog)
    y = parse_sql(WORKED_Y, cars_catalog)
    return x, y


def test_semantic_identity(worked_pair, cars_catalog):
    x, _ = worked_pair
    state = extract_schema_state(x, cars_catalog)
    assert semantic_similarity(state, state) == 1.0


def test_semantic_worked_example(worked_pair, cars_catalog):
    x, y = worked_pair
    sx = extract_schema_state(x, cars_catalog)
    sy = extract_schema_state(y, cars_catalog)
    # slots cars, cars.name, cars.year -> (1 + 1 + 0) / 3
    assert abs(semantic_similarity(sx, sy) - 2.0 / 3.0) < 1e-12


def test_semantic_disjoint_items(auto_shop):
    sx = extract_schema_state(parse_sql("SELECT name FROM cars", auto_shop), auto_shop)
    sy = extract_schema_state(parse_sql("SELECT city FROM owners", auto_shop), auto_shop)
    assert semantic_similarity(sx, sy) == 0.0


def test_semantic_mismatched_catalogs(cars_catalog, auto_shop):
    sx = extract_schema_state(parse_sql(WORKED_X, cars_catalog), cars_catalog)
    sy = extract_schema_state(parse_sql(WORKED_X, auto_shop), auto_shop)
    with pytest.raises(CatalogMismatchError):
        semantic_similarity(sx, sy)


def test_semantic_both_empty_states(cars_catalog):
    from sqltrace.schema_state import SchemaState

    empty = SchemaState.all_none(cars_catalog)
    assert semantic_similarity(empty, empty) == 0.0


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------


def test_tree_two_clause_layout(worked_pair):
    x, _ = worked_pair
    tree = build_sql_tree(x)
    assert tree.label == "SQL"
    assert [c.label for c in tree.children] == ["SELECT", "FROM"]
    assert tree.children[0].children[0].label == "cars.name"
    assert tree.children[1].children[0].label == "cars"


def test_tree_literal_anonymized(worked_pair):
    _, y = worked_pair
    tree = build_sql_tree(y)
    where = next(c for c in tree.children if c.label == "WHERE")
    op = where.children[0]
    assert op.label == ">"
    assert [c.label for c in op.children] == ["cars.year", "VAL"]


def test_tree_nested_subquery_fresh_sql_node(auto_shop):
    ast = parse_sql(
        "SELECT name FROM cars WHERE id IN (SELECT car_id FROM owners)", auto_shop
    )
    tree = build_sql_tree(ast)
    where = next(c for c in tree.children if c.label == "WHERE")
    in_node = where.children[0]
    assert in_node.label == "IN"
    assert in_node.children[1].label == "SQL"


def test_identical_asts_identical_trees(worked_pair, cars_catalog):
    _, y = worked_pair
    again = parse_sql(WORKED_Y, cars_catalog)
    assert build_sql_tree(y) == build_sql_tree(again)


# ---------------------------------------------------------------------------
# WL kernel
# ---------------------------------------------------------------------------


def test_self_kernel_at_h0_at_least_node_count(worked_pair):
    for ast in worked_pair:
        tree = build_sql_tree(ast)
        assert wl_kernel(tree, tree, KernelConfig(0)) >= tree.size()


def test_single_node_equal_labels_h0():
    a, b = TreeNode("X"), TreeNode("X")
    assert wl_kernel(a, b, KernelConfig(0)) == 1
    assert wl_kernel(a, TreeNode("Y"), KernelConfig(0)) == 0


def test_worked_pair_matches_naive_oracle_h2(worked_pair):
    x, y = worked_pair
    tx, ty = build_sql_tree(x), build_sql_tree(y)
    assert wl_kernel(tx, ty, KernelConfig(2)) == naive_wl_kernel(tx, ty, 2)


def test_random_pairs_match_naive_oracle(catalogs):
    rng = random.Random(2024)
    cats = list(catalogs.values())
    for i in range(120):
        catalog = cats[i % len(cats)]
        tx = build_sql_tree(random_ast(rng, catalog, tiny=True))
        ty = build_sql_tree(random_ast(rng, catalog, tiny=True))
        for h in (0, 1, 2):
            assert wl_kernel(tx, ty, KernelConfig(h)) == naive_wl_kernel(tx, ty, h)


def test_kernel_symmetry_and_monotonicity(catalogs):
    rng = random.Random(5)
    catalog = catalogs["auto_shop"]
    for _ in range(40):
        tx = build_sql_tree(random_ast(rng, catalog))
        ty = build_sql_tree(random_ast(rng, catalog))
        assert wl_kernel(tx, ty) == wl_kernel(ty, tx)
        values = [wl_kernel(tx, tx, KernelConfig(h)) for h in range(4)]
        assert values == sorted(values)  # self-kernel non-decreasing in h


def test_kernel_config_bounds():
    with pytest.raises(ValueError):
        KernelConfig(9)
    with pytest.raises(ValueError):
        KernelConfig(-1)


# ---------------------------------------------------------------------------
# Structural + combined
# ---------------------------------------------------------------------------


def test_structural_identity(worked_pair):
    for ast in worked_pair:
        tree = build_sql_tree(ast)
        assert structural_similarity(tree, tree) == 1.0


def test_structural_disjoint_alphabets():
    a = TreeNode("A", (TreeNode("B"), TreeNode("C")))
    z = TreeNode("X", (TreeNode("Y"),))
    assert structural_similarity(a, z) == 0.0


def test_structural_midrange_matches_oracle(worked_pair):
    x, y = worked_pair
    tx, ty = build_sql_tree(x), build_sql_tree(y)
    got = structural_similarity(tx, ty, KernelConfig(2))
    cross = naive_wl_kernel(tx, ty, 2)
    norm = (naive_wl_kernel(tx, tx, 2) * naive_wl_kernel(ty, ty, 2)) ** 0.5
    assert 0.0 < got < 1.0
    assert abs(got - cross / norm) < 1e-12


def test_combined_lambda_degenerate(worked_pair, cars_catalog):
    x, y = worked_pair
    sx = extract_schema_state(x, cars_catalog)
    sy = extract_schema_state(y, cars_catalog)
    semantic = semantic_similarity(sx, sy)
    structural = structural_similarity(build_sql_tree(x), build_sql_tree(y))
    assert combined_similarity(x, y, cars_catalog, SimilarityConfig(1.0)) == pytest.approx(semantic)
    assert combined_similarity(x, y, cars_catalog, SimilarityConfig(0.0)) == pytest.approx(structural)


def test_combined_blend_arithmetic(worked_pair, cars_catalog):
    x, y = worked_pair
    semantic = semantic_similarity(
        extract_schema_state(x, cars_catalog), extract_schema_state(y, cars_catalog)
    )
    structural = structural_similarity(build_sql_tree(x), build_sql_tree(y))
    got = combined_similarity(x, y, cars_catalog, SimilarityConfig(0.5))
    assert abs(got - (0.5 * semantic + 0.5 * structural)) < 1e-12
    # the spec's arithmetic anchor: blending 0.6667 with 1.0 gives 0.8333
    assert abs((0.5 * (2.0 / 3.0) + 0.5 * 1.0) - 0.8333) < 1e-4


def test_combined_identity_and_bounds(catalogs):
    rng = random.Random(31)
    catalog = catalogs["library"]
    for _ in range(30):
        x = random_ast(rng, catalog)
        y = random_ast(rng, catalog)
        sim = combined_similarity(x, y, catalog)
        assert 0.0 <= sim <= 1.0 + 1e-12
        assert combined_similarity(x, x, catalog) == pytest.approx(1.0)


def test_similarity_config_validation():
    with pytest.raises(ValueError):
        SimilarityConfig(1.5)
    with pytest.raises(ValueError):
        SimilarityConfig(-0.1)


# ---------------------------------------------------------------------------
# Contrastive weights
# ---------------------------------------------------------------------------


def test_two_turn_weights(worked_pair, cars_catalog):
    x, y = worked_pair
    matrix = pairwise_weights("c", [x, y], cars_catalog)
    assert matrix.rows[0][1] == 1.0
    assert matrix.rows[1][0] == 1.0


def test_three_identical_turns_uniform(cars_catalog):
    ast = parse_sql(WORKED_X, cars_catalog)
    matrix = pairwise_weights("c", [ast, ast, ast], cars_catalog)
    assert matrix.rows[0] == (0.0, 0.5, 0.5)


def test_three_turn_direct_normalization(auto_shop):
    a = parse_sql("SELECT name FROM cars", auto_shop)
    b = parse_sql("SELECT name FROM cars WHERE year > 2000", auto_shop)
    c = parse_sql("SELECT city FROM owners", auto_shop)
    cfg = SimilarityConfig(0.5)
    sim_ab = combined_similarity(a, b, auto_shop, cfg)
    sim_ac = combined_similarity(a, c, auto_shop, cfg)
    matrix = pairwise_weights("c", [a, b, c], auto_shop, cfg)
    total = sim_ab + sim_ac
    assert matrix.rows[0][1] == pytest.approx(sim_ab / total)
    assert matrix.rows[0][2] == pytest.approx(sim_ac / total)


def test_weight_rows_are_distributions(catalogs, seeds, templates):
    import sqltrace.synthesis as synthesis

    cfg = synthesis.SynthesisConfig(rng_seed=3, target_conversation_count=25)
    corpus = synthesis.synthesize_corpus(seeds, templates, catalogs, cfg)
    for conv in corpus:
        matrix = pairwise_weights(
            conv.conversation_id,
            [t.sql for t in conv.turns],
            catalogs[conv.db_id],
        )
        for x, row in enumerate(matrix.rows):
            assert row[x] == 0.0
            assert all(w >= 0.0 for w in row)
            assert abs(sum(row) - 1.0) < 1e-9


def test_weight_matrix_invariants():
    with pytest.raises(ValueError):
        WeightMatrix("c", ((0.5, 0.5), (1.0, 0.0)))  # nonzero diagonal
    with pytest.raises(ValueError):
        WeightMatrix("c", ((0.0, -0.1), (1.0, 0.0)))  # negative weight


def test_single_turn_conversation_rejected(cars_catalog):
    ast = parse_sql(WORKED_X, cars_catalog)
    with pytest.raises(ValueError):
        pairwise_weights("c", [ast], cars_catalog)


def test_runtime_under_one_ms(worked_pair, cars_catalog):
    import time

    x, y = worked_pair
    start = time.perf_counter()
    reps = 200
    for _ in range(reps):
        combined_similarity(x, y, cars_catalog)
    per_pair = (time.perf_counter() - start) / reps
    assert per_pair < 1e-3
