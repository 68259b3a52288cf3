/**
 * Readers for the training-example and weight JSONL files emitted by the
 * corpus pipeline, plus vocabulary construction and conversation grouping.
 */

import * as fs from "node:fs";

import { NUM_SST_LABELS, SST_LABELS } from "./losses.js";

export interface ExampleRecord {
  conversation_id: string;
  db_id: string;
  turn: number;
  tokens: string[];
  utterance_spans: Array<[number, number]>;
  slot_spans: Array<[number, number]>;
  sst_targets: string[];
  mlm_candidates: number[];
  udt_row: number;
}

export interface WeightRecord {
  conversation_id: string;
  turns: number;
  weights: number[]; // row-major n*n
}

export class DataFormatError extends Error {}

function readJsonl(path: string): unknown[] {
  const out: unknown[] = [];
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    try {
      out.push(JSON.parse(line));
    } catch {
      throw new DataFormatError(`${path}: record ${i + 1} is not valid JSON`);
    }
  }
  return out;
}

export function loadExamples(path: string): ExampleRecord[] {
  const records = readJsonl(path) as ExampleRecord[];
  records.forEach((record, i) => {
    if (!record.tokens || !record.slot_spans || !record.sst_targets)
      throw new DataFormatError(`${path}: record ${i + 1} missing fields`);
    if (record.slot_spans.length !== record.sst_targets.length)
      throw new DataFormatError(`${path}: record ${i + 1} slot/target mismatch`);
    for (const label of record.sst_targets)
      if (!(SST_LABELS as readonly string[]).includes(label))
        throw new DataFormatError(`${path}: record ${i + 1} unknown label ${label}`);
  });
  return records;
}

export function loadWeights(path: string, tolerance = 1e-6): Map<string, WeightRecord> {
  const out = new Map<string, WeightRecord>();
  const records = readJsonl(path) as WeightRecord[];
  records.forEach((record, i) => {
    const n = record.turns;
    if (!Array.isArray(record.weights) || record.weights.length !== n * n)
      throw new DataFormatError(`${path}: record ${i + 1} has a malformed weight matrix`);
    for (let x = 0; x < n; x++) {
      let sum = 0;
      for (let p = 0; p < n; p++) {
        const w = record.weights[x * n + p];
        if (w < 0) throw new DataFormatError(`${path}: record ${i + 1} row ${x} has a negative weight`);
        sum += w;
      }
      if (Math.abs(sum - 1) > tolerance)
        throw new DataFormatError(
          `${path}: record ${i + 1} row ${x} sums to ${sum.toFixed(8)}, expected 1`,
        );
    }
    out.set(record.conversation_id, record);
  });
  return out;
}

export class Vocab {
  readonly tokens: string[];
  readonly ids: Map<string, number>;
  readonly maskId: number;

  constructor(tokenSet: Iterable<string>) {
    const all = new Set<string>(tokenSet);
    all.add("[MASK]");
    this.tokens = [...all].sort();
    this.ids = new Map(this.tokens.map((t, i) => [t, i]));
    this.maskId = this.ids.get("[MASK]")!;
  }

  get size(): number {
    return this.tokens.length;
  }

  encode(tokens: string[]): number[] {
    return tokens.map((t) => {
      const id = this.ids.get(t);
      if (id === undefined) throw new DataFormatError(`token ${t} outside vocabulary`);
      return id;
    });
  }
}

export function buildVocab(examples: ExampleRecord[]): Vocab {
  const tokens = new Set<string>();
  for (const example of examples) for (const t of example.tokens) tokens.add(t);
  return new Vocab(tokens);
}

export const LABEL_IDS: Map<string, number> = new Map(
  SST_LABELS.map((label, i) => [label, i]),
);

export function labelIds(targets: string[]): number[] {
  return targets.map((t) => LABEL_IDS.get(t)!);
}

export interface ConversationGroup {
  conversationId: string;
  examples: ExampleRecord[]; // sorted by turn
  weights: WeightRecord | null;
}

export function groupByConversation(
  examples: ExampleRecord[],
  weights: Map<string, WeightRecord>,
): ConversationGroup[] {
  const byId = new Map<string, ExampleRecord[]>();
  for (const example of examples) {
    const list = byId.get(example.conversation_id) ?? [];
    list.push(example);
    byId.set(example.conversation_id, list);
  }
  const groups: ConversationGroup[] = [];
  for (const id of [...byId.keys()].sort()) {
    const turns = byId.get(id)!.sort((a, b) => a.turn - b.turn);
    const weightRecord = weights.get(id) ?? null;
    if (weightRecord && weightRecord.turns !== turns.length)
      throw new DataFormatError(`conversation ${id}: weight matrix size mismatch`);
    groups.push({ conversationId: id, examples: turns, weights: weightRecord });
  }
  return groups;
}

export { NUM_SST_LABELS };
