import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, test } from "vitest";

import {
  DataFormatError,
  buildVocab,
  groupByConversation,
  labelIds,
  loadExamples,
  loadWeights,
} from "../src/data.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(here, "fixtures");
const EXAMPLES = path.join(FIXTURES, "examples.jsonl");
const WEIGHTS = path.join(FIXTURES, "weights.jsonl");

describe("fixture loading", () => {
  test("examples parse and look structurally sound", () => {
    const examples = loadExamples(EXAMPLES);
    expect(examples.length).toBeGreaterThanOrEqual(400);
    for (const example of examples.slice(0, 50)) {
      expect(example.tokens[0]).toBe("[CLS]");
      expect(example.slot_spans.length).toBe(example.sst_targets.length);
      for (const pos of example.mlm_candidates) {
        expect(pos).toBeGreaterThan(0);
        expect(pos).toBeLessThan(example.tokens.length);
        expect(example.tokens[pos]).not.toBe("[SEP]");
      }
    }
  });

  test("weights parse with unit row sums", () => {
    const weights = loadWeights(WEIGHTS);
    expect(weights.size).toBe(200);
    for (const record of weights.values()) {
      const n = record.turns;
      for (let x = 0; x < n; x++) {
        let sum = 0;
        for (let p = 0; p < n; p++) sum += record.weights[x * n + p];
        expect(Math.abs(sum - 1)).toBeLessThan(1e-6);
      }
    }
  });

  test("grouping pairs every conversation with its weight matrix", () => {
    const examples = loadExamples(EXAMPLES);
    const weights = loadWeights(WEIGHTS);
    const groups = groupByConversation(examples, weights);
    expect(groups.length).toBe(200);
    for (const group of groups) {
      expect(group.weights).not.toBeNull();
      expect(group.examples.length).toBe(group.weights!.turns);
      group.examples.forEach((e, i) => {
        expect(e.turn).toBe(i + 1);
        expect(e.udt_row).toBe(i);
      });
    }
  });

  test("vocabulary is sorted and contains the mask token", () => {
    const vocab = buildVocab(loadExamples(EXAMPLES));
    expect(vocab.tokens).toEqual([...vocab.tokens].sort());
    expect(vocab.tokens[vocab.maskId]).toBe("[MASK]");
    expect(vocab.size).toBeGreaterThan(100);
  });

  test("label ids cover the fixed label space", () => {
    expect(labelIds(["SELECT", "NONE", "ORDER_BY"])).toEqual([0, 7, 6]);
  });
});

describe("format errors", () => {
  function tmpFile(content: string): string {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "harness-test-"));
    const file = path.join(dir, "weights.jsonl");
    fs.writeFileSync(file, content);
    return file;
  }

  test("corrupted weight row (sum != 1) is a format error with record index", () => {
    const file = tmpFile(
      '{"conversation_id": "c1", "turns": 2, "weights": [0.0, 1.0, 1.0, 0.0]}\n' +
        '{"conversation_id": "c2", "turns": 2, "weights": [0.0, 0.7, 1.0, 0.0]}\n',
    );
    expect(() => loadWeights(file)).toThrow(DataFormatError);
    expect(() => loadWeights(file)).toThrow(/record 2 row 0/);
  });

  test("negative weight is rejected", () => {
    const file = tmpFile(
      '{"conversation_id": "c1", "turns": 2, "weights": [0.0, 1.0, -0.2, 1.2]}\n',
    );
    expect(() => loadWeights(file)).toThrow(/negative/);
  });

  test("invalid JSON names the record index", () => {
    const file = tmpFile('{"conversation_id": "c1", "turns": 2, "weights": [\n');
    expect(() => loadWeights(file)).toThrow(/record 1/);
  });

  test("unknown SST label is rejected", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "harness-test-"));
    const file = path.join(dir, "examples.jsonl");
    fs.writeFileSync(
      file,
      JSON.stringify({
        conversation_id: "c1",
        db_id: "d",
        turn: 1,
        tokens: ["[CLS]", "hi", "[SEP]"],
        utterance_spans: [[1, 2]],
        slot_spans: [[1, 2]],
        sst_targets: ["FLY"],
        mlm_candidates: [1],
        udt_row: 0,
      }) + "\n",
    );
    expect(() => loadExamples(file)).toThrow(/unknown label/);
  });
});
