from __future__ import annotations

import hashlib
import json
import os

import pytest

from sqltrace.cli import main
from tests_paths import SAMPLE_CATALOGS, SAMPLE_SEEDS, TEMPLATE_PACK


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_schema_state_output(capsys):
    code, out, _ = run(
        capsys, "schema-state", "SELECT name FROM cars", SAMPLE_CATALOGS, "--db", "auto_shop"
    )
    assert code == 0
    state = json.loads(out)
    by_name = {slot["name"]: slot["value"] for slot in state["slots"]}
    assert by_name["cars.name"] == ["SELECT"]
    assert by_name["cars"] == ["FROM"]
    assert by_name["cars.year"] == []


def test_schema_state_parse_error_exit_2(capsys):
    code, _, err = run(capsys, "schema-state", "SELECT FROM cars", SAMPLE_CATALOGS, "--db", "auto_shop")
    assert code == 2
    assert "grammar" in err


def test_schema_state_missing_catalog_exit_1(capsys):
    code, _, err = run(capsys, "schema-state", "SELECT name FROM cars", "/no/such/file.json")
    assert code == 1


def test_similarity_identity(capsys):
    code, out, _ = run(
        capsys, "similarity", "SELECT name FROM cars", "SELECT name FROM cars",
        SAMPLE_CATALOGS, "--db", "auto_shop",
    )
    assert code == 0
    assert json.loads(out) == {"semantic": 1.0, "structural": 1.0, "combined": 1.0}
    assert '"semantic": 1.0000' in out


def test_similarity_worked_pair(capsys):
    code, out, _ = run(
        capsys, "similarity",
        "SELECT name FROM cars", "SELECT name FROM cars WHERE year > 2000",
        SAMPLE_CATALOGS, "--db", "auto_shop", "--lambda", "0.5",
    )
    assert code == 0
    report = json.loads(out)
    # auto_shop's cars table has 5 columns: slots cars, cars.name, cars.year
    # are the non-empty ones, same arithmetic as the worked catalog
    assert report["semantic"] == pytest.approx(0.6667, abs=1e-4)
    assert report["combined"] == pytest.approx(
        0.5 * report["semantic"] + 0.5 * report["structural"], abs=1e-4
    )


def test_similarity_bad_lambda_exit_1(capsys):
    code, _, err = run(
        capsys, "similarity", "SELECT name FROM cars", "SELECT name FROM cars",
        SAMPLE_CATALOGS, "--lambda", "1.5",
    )
    assert code == 1
    assert "lambda" in err


def test_similarity_parse_failure_exit_2(capsys):
    code, _, _ = run(
        capsys, "similarity", "SELECT name FROM", "SELECT name FROM cars", SAMPLE_CATALOGS
    )
    assert code == 2


def test_synthesize_deterministic_digests(tmp_path, capsys):
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (out1, out2):
        code, _, _ = run(
            capsys, "synthesize",
            "--seeds", SAMPLE_SEEDS, "--templates", TEMPLATE_PACK,
            "--catalogs", SAMPLE_CATALOGS, "--count", "30",
            "--rng-seed", "17", "--out", str(out),
        )
        assert code == 0
    digest1 = hashlib.sha256(out1.read_bytes()).hexdigest()
    digest2 = hashlib.sha256(out2.read_bytes()).hexdigest()
    assert digest1 == digest2

    sidecar = json.loads((tmp_path / "a.jsonl.stats.json").read_text())
    assert sum(sidecar["turn_histogram"].values()) == 30


def test_synthesize_missing_templates_usage_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SQLTRACE_TEMPLATE_DIR", raising=False)
    code, _, err = run(
        capsys, "synthesize", "--seeds", SAMPLE_SEEDS,
        "--catalogs", SAMPLE_CATALOGS, "--out", str(tmp_path / "x.jsonl"),
    )
    assert code == 64
    assert "templates" in err


def test_synthesize_templates_from_env_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SQLTRACE_TEMPLATE_DIR", os.path.dirname(TEMPLATE_PACK))
    out = tmp_path / "env.jsonl"
    code, _, _ = run(
        capsys, "synthesize", "--seeds", SAMPLE_SEEDS,
        "--catalogs", SAMPLE_CATALOGS, "--count", "5", "--out", str(out),
    )
    assert code == 0
    assert out.exists()


def test_missing_required_flag_exits_64(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synthesize", "--seeds", SAMPLE_SEEDS])
    assert exc.value.code == 64


def test_emit_examples_cli(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    code, _, _ = run(
        capsys, "synthesize", "--seeds", SAMPLE_SEEDS, "--templates", TEMPLATE_PACK,
        "--catalogs", SAMPLE_CATALOGS, "--count", "10", "--rng-seed", "3",
        "--out", str(corpus),
    )
    assert code == 0
    examples, weights = tmp_path / "ex.jsonl", tmp_path / "w.jsonl"
    code, out, _ = run(
        capsys, "emit-examples", "--corpus", str(corpus),
        "--catalogs", SAMPLE_CATALOGS,
        "--out-examples", str(examples), "--out-weights", str(weights),
    )
    assert code == 0
    assert len(weights.read_text().splitlines()) == 10


def test_stats_three_turn_histogram(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    code, _, _ = run(
        capsys, "synthesize", "--seeds", SAMPLE_SEEDS, "--templates", TEMPLATE_PACK,
        "--catalogs", SAMPLE_CATALOGS, "--count", "12", "--rng-seed", "4",
        "--max-turns", "3", "--out", str(corpus),
    )
    assert code == 0
    code, out, _ = run(capsys, "stats", str(corpus))
    assert code == 0
    stats = json.loads(out)
    assert sum(stats["turn_histogram"].values()) == 12
    assert set(stats["turn_histogram"]) <= {"2", "3"}
    assert stats["max_input_length"] > 0


def test_stats_easy_query_bucket(tmp_path, capsys):
    line = {
        "conversation_id": "c1",
        "db_id": "cars_db",
        "turns": [
            {
                "utterance": "show the names",
                "sql": "SELECT cars.name FROM cars",
                "state": {
                    "slots": [
                        {"name": "cars", "value": ["FROM"]},
                        {"name": "cars.name", "value": ["SELECT"]},
                        {"name": "cars.year", "value": []},
                    ]
                },
                "template_id": None,
            }
        ],
    }
    corpus = tmp_path / "tiny.jsonl"
    corpus.write_text(json.dumps(line) + "\n")
    code, out, _ = run(capsys, "stats", str(corpus))
    assert code == 0
    stats = json.loads(out)
    assert stats["difficulty_histogram"]["easy"] == 1
    assert stats["turn_histogram"] == {"1": 1}


def test_stats_truncated_line_exit_2(tmp_path, capsys):
    corpus = tmp_path / "broken.jsonl"
    corpus.write_text('{"conversation_id": "c1", "turns": [\n')
    code, _, err = run(capsys, "stats", str(corpus))
    assert code == 2
    assert "line 1" in err
