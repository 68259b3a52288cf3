"""JSONL readers/writers for conversations, seeds, and catalogs.

All output lines use sorted keys and compact separators so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

import json
from typing import Iterable

from .catalog import SchemaCatalog
from .errors import ParseError
from .parser import parse_sql
from .schema_state import SchemaState, extract_schema_state
from .sql_ast import render_sql
from .synthesis import Conversation, SeedPair, Turn, seed_question


def dumps_compact(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def conversation_to_obj(conv: Conversation) -> dict:
    return {
        "conversation_id": conv.conversation_id,
        "db_id": conv.db_id,
        "turns": [
            {
                "utterance": turn.utterance,
                "sql": render_sql(turn.sql),
                "state": turn.state.to_json_obj(),
                "template_id": turn.template_id,
            }
            for turn in conv.turns
        ],
    }


def conversation_from_obj(obj: dict, catalogs: dict[str, SchemaCatalog]) -> Conversation:
    db_id = obj["db_id"]
    if db_id not in catalogs:
        raise ParseError("resolution", 0, f"conversation references unknown db_id '{db_id}'")
    catalog = catalogs[db_id]
    turns = []
    for entry in obj["turns"]:
        ast = parse_sql(entry["sql"], catalog)
        turns.append(
            Turn(
                utterance=entry["utterance"],
                sql=ast,
                state=SchemaState.from_json_obj(entry["state"]),
                template_id=entry.get("template_id"),
            )
        )
    return Conversation(obj["conversation_id"], db_id, tuple(turns))


def write_corpus(conversations: Iterable[Conversation], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for conv in conversations:
            fh.write(dumps_compact(conversation_to_obj(conv)))
            fh.write("\n")


def read_corpus_raw(path: str) -> list[dict]:
    """Decoded corpus lines; malformed lines raise with their line number."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(
                    "lex", 0, f"malformed corpus line {lineno}: {exc.msg}"
                ) from exc
            if not isinstance(obj, dict) or "turns" not in obj:
                raise ParseError("grammar", 0, f"malformed corpus line {lineno}: not a conversation")
            out.append(obj)
    return out


def read_corpus(path: str, catalogs: dict[str, SchemaCatalog]) -> list[Conversation]:
    return [conversation_from_obj(obj, catalogs) for obj in read_corpus_raw(path)]


def load_seeds(path: str, catalogs: dict[str, SchemaCatalog]) -> list[SeedPair]:
    """Seed pairs from a JSON array; missing utterances are template-filled."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    seeds = []
    for entry in data:
        db_id = entry["db_id"]
        if db_id not in catalogs:
            raise ParseError("resolution", 0, f"seed references unknown db_id '{db_id}'")
        catalog = catalogs[db_id]
        ast = parse_sql(entry["sql"], catalog)
        utterance = entry.get("utterance") or seed_question(ast, catalog)
        seeds.append(SeedPair(utterance, ast, db_id))
    return seeds
