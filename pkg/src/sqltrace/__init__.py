"""Schema-state extraction, SQL similarity, and conversation synthesis for
context-dependent text-to-SQL training data."""

from .catalog import SchemaCatalog, load_catalogs, validate_catalog
from .cli import default_template_path
from .errors import ParseError, SynthesisError
from .parser import parse_sql
from .schema_state import (
    KEYWORDS,
    ModelInput,
    SchemaState,
    extract_clause_map,
    extract_schema_state,
    serialize_input,
)
from .similarity import (
    KernelConfig,
    SimilarityConfig,
    WeightMatrix,
    build_sql_tree,
    combined_similarity,
    contrastive_weights,
    semantic_similarity,
    structural_similarity,
    wl_kernel,
)
from .sql_ast import SqlAst, render_sql
from .synthesis import (
    Conversation,
    FollowUpTemplate,
    SeedPair,
    SynthesisConfig,
    check_constraints,
    instantiate_template,
    load_templates,
    rollout_conversation,
    synthesize_corpus,
)

__all__ = [
    "SchemaCatalog", "load_catalogs", "validate_catalog",
    "ParseError", "SynthesisError",
    "parse_sql", "render_sql", "SqlAst",
    "KEYWORDS", "SchemaState", "ModelInput",
    "extract_schema_state", "extract_clause_map", "serialize_input",
    "KernelConfig", "SimilarityConfig", "WeightMatrix",
    "semantic_similarity", "structural_similarity", "combined_similarity",
    "build_sql_tree", "wl_kernel", "contrastive_weights",
    "Conversation", "FollowUpTemplate", "SeedPair", "SynthesisConfig",
    "check_constraints", "instantiate_template", "load_templates",
    "rollout_conversation", "synthesize_corpus",
    "default_template_path",
]

__version__ = "0.1.0"
