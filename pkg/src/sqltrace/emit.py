"""Training-example emission: serialized inputs, SST targets, MLM candidates,
and the per-conversation contrastive weight files."""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import SchemaCatalog
from .schema_state import ModelInput, SchemaState, serialize_input
from .similarity import SimilarityConfig, WeightMatrix, contrastive_weights
from .synthesis import Conversation

# Highest-precedence keyword wins when a slot occurs under several clauses;
# intent-bearing clauses outrank structural ones.
TARGET_PRECEDENCE = ("SELECT", "WHERE", "GROUP_BY", "HAVING", "ORDER_BY", "JOIN", "FROM")

NONE_LABEL = "NONE"


@dataclass(frozen=True)
class TrainingExample:
    conversation_id: str
    db_id: str
    turn: int  # 1-based
    input: ModelInput
    sst_targets: tuple[str, ...]
    mlm_candidates: tuple[int, ...]
    udt_row: int


def canonical_target(value: frozenset[str]) -> str:
    for keyword in TARGET_PRECEDENCE:
        if keyword in value:
            return keyword
    return NONE_LABEL


def sst_targets_for(state: SchemaState) -> tuple[str, ...]:
    return tuple(canonical_target(value) for _, value in state.slots)


def mlm_candidate_positions(model_input: ModelInput) -> tuple[int, ...]:
    """Utterance content tokens plus the slot-name token of every slot span.

    Keyword value tokens, "=", and all control tokens stay unmaskable.
    """
    positions: list[int] = []
    for start, end in model_input.utterance_spans:
        positions.extend(range(start, end))
    for start, _ in model_input.slot_spans:
        positions.append(start)
    return tuple(positions)


def build_training_examples(
    conv: Conversation, catalog: SchemaCatalog, max_len: int = 256
) -> list[TrainingExample]:
    examples = []
    history: list[str] = []
    prev_state = SchemaState.all_none(catalog)
    for idx, turn in enumerate(conv.turns):
        history.append(turn.utterance)
        model_input = serialize_input(history, prev_state, catalog, max_len)
        examples.append(
            TrainingExample(
                conversation_id=conv.conversation_id,
                db_id=conv.db_id,
                turn=idx + 1,
                input=model_input,
                sst_targets=sst_targets_for(turn.state),
                mlm_candidates=mlm_candidate_positions(model_input),
                udt_row=idx,
            )
        )
        prev_state = turn.state
    return examples


def example_to_obj(example: TrainingExample) -> dict:
    return {
        "conversation_id": example.conversation_id,
        "db_id": example.db_id,
        "turn": example.turn,
        "tokens": list(example.input.tokens),
        "utterance_spans": [list(span) for span in example.input.utterance_spans],
        "slot_spans": [list(span) for span in example.input.slot_spans],
        "sst_targets": list(example.sst_targets),
        "mlm_candidates": list(example.mlm_candidates),
        "udt_row": example.udt_row,
    }


def format_weight_row(row: tuple[float, ...], diagonal: int) -> list[str]:
    """Row entries as fixed 6-decimal strings that still sum to exactly 1.

    Rounding to 6 decimals can shift the row sum by a few 1e-6; the residual
    is redistributed largest-remainder style, never touching the diagonal.
    """
    units = [round(w * 1_000_000) for w in row]
    residual = 1_000_000 - sum(units)
    if residual != 0:
        order = sorted(
            (i for i in range(len(row)) if i != diagonal),
            key=lambda i: (row[i] * 1_000_000) - units[i],
            reverse=residual > 0,
        )
        step = 1 if residual > 0 else -1
        k = 0
        while residual != 0 and order:
            i = order[k % len(order)]
            if step < 0 and units[i] <= 0:
                k += 1
                continue
            units[i] += step
            residual -= step
            k += 1
    return [f"{u / 1_000_000:.6f}" for u in units]


def weight_record_line(matrix: WeightMatrix) -> str:
    rows = []
    for x, row in enumerate(matrix.rows):
        rows.extend(format_weight_row(row, x))
    body = ", ".join(rows)
    return (
        f'{{"conversation_id": "{matrix.conversation_id}", '
        f'"turns": {matrix.turns}, "weights": [{body}]}}'
    )


def emit_training_examples(
    corpus: list[Conversation],
    catalogs: dict[str, SchemaCatalog],
    sim_cfg: SimilarityConfig,
    examples_path: str,
    weights_path: str,
    max_len: int = 256,
) -> tuple[int, int]:
    """Write one example per turn and one weight record per conversation.

    Returns (example_count, weight_record_count). Single-turn conversations
    get examples but no weight record (weights need at least two turns).
    """
    from .corpus_io import dumps_compact

    n_examples = 0
    n_weights = 0
    with open(examples_path, "w", encoding="utf-8") as ex_fh, open(
        weights_path, "w", encoding="utf-8"
    ) as w_fh:
        for conv in corpus:
            catalog = catalogs[conv.db_id]
            for example in build_training_examples(conv, catalog, max_len):
                ex_fh.write(dumps_compact(example_to_obj(example)))
                ex_fh.write("\n")
                n_examples += 1
            if conv.turn_count >= 2:
                matrix = contrastive_weights(conv, catalog, sim_cfg)
                w_fh.write(weight_record_line(matrix))
                w_fh.write("\n")
                n_weights += 1
    return n_examples, n_weights
