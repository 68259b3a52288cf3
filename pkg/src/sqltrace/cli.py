"""Command-line surface: schema-state, similarity, synthesize, emit-examples, stats.

Exit codes: 0 success, 1 config/environment problem, 2 data error,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .catalog import load_catalogs
from .corpus_io import (
    dumps_compact,
    load_seeds,
    read_corpus,
    read_corpus_raw,
    write_corpus,
)
from .emit import emit_training_examples
from .errors import ParseError, SynthesisError
from .parser import parse_sql
from .schema_state import extract_schema_state
from .similarity import (
    KernelConfig,
    SimilarityConfig,
    build_sql_tree,
    semantic_similarity,
    structural_similarity,
)
from .stats import corpus_stats
from .synthesis import SynthesisConfig, TemplateError, load_templates, synthesize_corpus

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_USAGE = 64

TEMPLATE_DIR_ENV = "SQLTRACE_TEMPLATE_DIR"
TEMPLATE_FILE_NAME = "followup_templates.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def default_template_path() -> str:
    """Packaged 100-template follow-up pack."""
    return os.path.join(os.path.dirname(__file__), "data", TEMPLATE_FILE_NAME)


def _resolve_templates_flag(value: str | None) -> str | None:
    if value:
        return value
    env_dir = os.environ.get(TEMPLATE_DIR_ENV)
    if env_dir:
        return os.path.join(env_dir, TEMPLATE_FILE_NAME)
    return None


def _pick_catalog(path: str, db: str | None):
    catalogs = load_catalogs(path)
    if db is not None:
        if db not in catalogs:
            raise FileNotFoundError(f"db_id '{db}' not present in {path}")
        return catalogs[db]
    return next(iter(catalogs.values()))


def _build_parser() -> _Parser:
    parser = _Parser(prog="sqltrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("schema-state", help="print the schema state of one query")
    p.add_argument("sql")
    p.add_argument("catalog", help="Spider-format tables JSON")
    p.add_argument("--db", help="db_id to pick from a multi-entry catalog file")

    p = sub.add_parser("similarity", help="semantic/structural/combined similarity")
    p.add_argument("sql1")
    p.add_argument("sql2")
    p.add_argument("catalog")
    p.add_argument("--db")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--wl-iterations", type=int, default=3)

    p = sub.add_parser("synthesize", help="generate a conversation corpus")
    p.add_argument("--seeds", required=True)
    p.add_argument("--templates", default=None,
                   help=f"template pack (default: ${TEMPLATE_DIR_ENV}/{TEMPLATE_FILE_NAME})")
    p.add_argument("--catalogs", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--max-turns", type=int, default=4)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--rollout-attempts", type=int, default=20)
    p.add_argument("--out", required=True)

    p = sub.add_parser("emit-examples", help="emit training examples + weight files")
    p.add_argument("--corpus", required=True)
    p.add_argument("--catalogs", required=True)
    p.add_argument("--out-examples", required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--wl-iterations", type=int, default=3)
    p.add_argument("--max-len", type=int, default=256)

    p = sub.add_parser("stats", help="corpus statistics as JSON")
    p.add_argument("corpus")
    return parser


def _cmd_schema_state(args) -> int:
    catalog = _pick_catalog(args.catalog, args.db)
    try:
        ast = parse_sql(args.sql, catalog)
    except ParseError as exc:
        print(f"sqltrace: {exc}", file=sys.stderr)
        return EXIT_DATA
    state = extract_schema_state(ast, catalog)
    print(json.dumps(state.to_json_obj(), indent=2))
    return EXIT_OK


def _cmd_similarity(args) -> int:
    sim_cfg = SimilarityConfig(args.lam, KernelConfig(args.wl_iterations))
    catalog = _pick_catalog(args.catalog, args.db)
    try:
        ast1 = parse_sql(args.sql1, catalog)
        ast2 = parse_sql(args.sql2, catalog)
    except ParseError as exc:
        print(f"sqltrace: {exc}", file=sys.stderr)
        return EXIT_DATA
    semantic = semantic_similarity(
        extract_schema_state(ast1, catalog), extract_schema_state(ast2, catalog)
    )
    structural = structural_similarity(
        build_sql_tree(ast1), build_sql_tree(ast2), sim_cfg.kernel
    )
    combined = sim_cfg.lam * semantic + (1.0 - sim_cfg.lam) * structural
    print(
        f'{{"semantic": {semantic:.4f}, "structural": {structural:.4f}, '
        f'"combined": {combined:.4f}}}'
    )
    return EXIT_OK


def _cmd_synthesize(args) -> int:
    templates_path = _resolve_templates_flag(args.templates)
    if templates_path is None:
        print(
            f"sqltrace synthesize: error: --templates is required "
            f"(or set ${TEMPLATE_DIR_ENV})",
            file=sys.stderr,
        )
        return EXIT_USAGE
    templates = load_templates(templates_path)
    catalogs = load_catalogs(args.catalogs)
    seeds = load_seeds(args.seeds, catalogs)
    cfg = SynthesisConfig(
        max_turns=args.max_turns,
        rollout_attempts=args.rollout_attempts,
        rng_seed=args.rng_seed,
        target_conversation_count=args.count,
    )
    corpus = synthesize_corpus(seeds, templates, catalogs, cfg)
    write_corpus(corpus, args.out)
    stats = corpus_stats([json.loads(dumps_compact(obj)) for obj in map_objs(corpus)])
    with open(args.out + ".stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats.to_json_obj(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(corpus)} conversations to {args.out}")
    return EXIT_OK


def map_objs(corpus):
    from .corpus_io import conversation_to_obj

    return [conversation_to_obj(c) for c in corpus]


def _cmd_emit_examples(args) -> int:
    sim_cfg = SimilarityConfig(args.lam, KernelConfig(args.wl_iterations))
    catalogs = load_catalogs(args.catalogs)
    corpus = read_corpus(args.corpus, catalogs)
    n_examples, n_weights = emit_training_examples(
        corpus, catalogs, sim_cfg, args.out_examples, args.out_weights, args.max_len
    )
    print(f"wrote {n_examples} examples, {n_weights} weight records")
    return EXIT_OK


def _cmd_stats(args) -> int:
    objs = read_corpus_raw(args.corpus)
    stats = corpus_stats(objs)
    print(json.dumps(stats.to_json_obj(), indent=2, sort_keys=True))
    return EXIT_OK


_COMMANDS = {
    "schema-state": _cmd_schema_state,
    "similarity": _cmd_similarity,
    "synthesize": _cmd_synthesize,
    "emit-examples": _cmd_emit_examples,
    "stats": _cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"sqltrace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SynthesisError, ValueError) as exc:
        if isinstance(exc, TemplateError):
            print(f"sqltrace: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"sqltrace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"sqltrace: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
