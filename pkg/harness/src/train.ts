/**
 * Joint pre-training loop over the corpus pipeline's example/weight files:
 * one encode per turn (with fresh masks each epoch), schema-state tracking
 * over slot spans, weighted contrastive loss over pooled turns, MLM at the
 * masked positions, all combined through learned uncertainty scalars.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";

import { saveCheckpoint } from "./checkpoint.js";
import {
  ConversationGroup,
  ExampleRecord,
  Vocab,
  buildVocab,
  groupByConversation,
  labelIds,
  loadExamples,
  loadWeights,
} from "./data.js";
import { DEFAULT_ENCODER, EncoderParams, encode } from "./encoder.js";
import {
  HeadParams,
  NUM_SST_LABELS,
  SST_LABELS,
  UdtAnchor,
  UncertaintyParams,
  attentivePool,
  headParamList,
  initHeadParams,
  jointLoss,
  mlmLoss,
  sampleMask,
  sstLoss,
  udtLoss,
} from "./losses.js";
import { Adam, clipGradNorm } from "./optim.js";
import { Rng } from "./rng.js";
import { Tensor, backward, noGrad, resetTape, scale, sumAll, concatRows } from "./tensor.js";

export interface TrainConfig {
  epochs: number;
  batchSize: number; // conversations per optimization step
  lr: number;
  seed: number;
  tau: number;
  maskProb: number;
  hidden: number;
  layers: number;
  heads: number;
  ffnHidden: number;
  holdoutEvery: number; // every k-th conversation is held out
  clipNorm: number;
}

export const DEFAULT_TRAIN: TrainConfig = {
  epochs: 30,
  batchSize: 8,
  lr: 2e-3,
  seed: 42,
  tau: 0.07,
  maskProb: 0.15,
  hidden: DEFAULT_ENCODER.hidden,
  layers: DEFAULT_ENCODER.layers,
  heads: DEFAULT_ENCODER.heads,
  ffnHidden: DEFAULT_ENCODER.ffnHidden,
  holdoutEvery: 5,
  clipNorm: 1.0,
};

export interface EpochMetrics {
  epoch: number;
  lSst: number;
  lUdt: number;
  lMlm: number;
  lJoint: number;
  sigma1: number;
  sigma2: number;
  sigma3: number;
  sstAcc: number;
}

export interface TrainResult {
  metrics: EpochMetrics[];
  csv: string;
  vocabSize: number;
  trainConversations: number;
  holdoutConversations: number;
}

interface PreparedExample {
  ids: number[];
  targets: number[];
  slotSpans: Array<[number, number]>;
  candidates: number[];
}

function validateConfig(cfg: TrainConfig): void {
  if (cfg.tau <= 0) throw new Error("temperature must be positive");
  if (cfg.maskProb <= 0 || cfg.maskProb >= 1)
    throw new Error("mask probability must be in (0,1)");
  if (cfg.epochs < 1 || cfg.batchSize < 1) throw new Error("bad epoch/batch config");
}

function prepare(example: ExampleRecord, vocab: Vocab): PreparedExample {
  return {
    ids: vocab.encode(example.tokens),
    targets: labelIds(example.sst_targets),
    slotSpans: example.slot_spans,
    candidates: example.mlm_candidates,
  };
}

export function train(
  examplesPath: string,
  weightsPath: string,
  cfg: TrainConfig = DEFAULT_TRAIN,
  outDir: string | null = null,
): TrainResult {
  validateConfig(cfg);
  const examples = loadExamples(examplesPath);
  const weights = loadWeights(weightsPath);
  const groups = groupByConversation(examples, weights);
  const vocab = buildVocab(examples);
  const maxLen = Math.max(...examples.map((e) => e.tokens.length));

  const holdout: ConversationGroup[] = [];
  const trainGroups: ConversationGroup[] = [];
  groups.forEach((g, i) => {
    (i % cfg.holdoutEvery === cfg.holdoutEvery - 1 ? holdout : trainGroups).push(g);
  });

  const rng = new Rng(cfg.seed);
  const encoder = new EncoderParams(
    {
      vocabSize: vocab.size,
      hidden: cfg.hidden,
      layers: cfg.layers,
      heads: cfg.heads,
      ffnHidden: cfg.ffnHidden,
      maxLen,
    },
    rng,
  );
  const heads = initHeadParams(cfg.hidden, rng);
  const uncertainty = new UncertaintyParams(1.0);
  const allParams = [...encoder.all(), ...headParamList(heads), uncertainty.raw];
  const adam = new Adam(allParams, cfg.lr);

  const prepared = new Map<ExampleRecord, PreparedExample>();
  for (const example of examples) prepared.set(example, prepare(example, vocab));

  const metrics: EpochMetrics[] = [];
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    const order = rng.shuffle(trainGroups);
    let sumSst = 0, sumUdt = 0, sumMlm = 0, sumJoint = 0, steps = 0;

    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const batch = order.slice(start, start + cfg.batchSize);
      resetTape();
      adam.zeroGrad();

      const sstParts: Tensor[] = [];
      const mlmParts: Tensor[] = [];
      let maskedTotal = 0;
      const pooledByConv: Tensor[][] = [];

      for (const group of batch) {
        const pooledTurns: Tensor[] = [];
        for (const example of group.examples) {
          const prep = prepared.get(example)!;
          const { maskedIds, maskedPositions } = sampleMask(
            prep.ids, prep.candidates, cfg.maskProb, vocab.maskId, rng,
          );
          const encoded = encode(maskedIds, encoder);
          sstParts.push(sstLoss(encoded, prep.slotSpans, prep.targets, heads).loss);
          const mlm = mlmLoss(encoded, maskedPositions, prep.ids, encoder.tokenEmbedding);
          if (mlm.count > 0) {
            mlmParts.push(scale(mlm.loss, mlm.count));
            maskedTotal += mlm.count;
          }
          pooledTurns.push(attentivePool(encoded, heads.poolInputW, heads.poolInputV));
        }
        pooledByConv.push(pooledTurns);
      }

      const sstMean = scale(sumAll(concatRows(sstParts.map((t) => t))), 1 / sstParts.length);
      const mlmMean =
        maskedTotal > 0
          ? scale(sumAll(concatRows(mlmParts.map((t) => t))), 1 / maskedTotal)
          : Tensor.scalar(0);

      const anchors: UdtAnchor[] = [];
      batch.forEach((group, gi) => {
        const record = group.weights;
        if (!record || group.examples.length < 2) return;
        const n = group.examples.length;
        const negatives = pooledByConv
          .filter((_, other) => other !== gi)
          .flat();
        for (let x = 0; x < n; x++) {
          const positives = [];
          for (let p = 0; p < n; p++) {
            if (p === x) continue;
            positives.push({
              pooled: pooledByConv[gi][p],
              weight: record.weights[x * n + p],
            });
          }
          anchors.push({ pooled: pooledByConv[gi][x], positives, negatives });
        }
      });
      const udt = udtLoss(anchors, cfg.tau);
      const udtMean = udt.terms > 0 ? scale(udt.loss, 1 / udt.terms) : Tensor.scalar(0);

      const joint = jointLoss(sstMean, udtMean, mlmMean, uncertainty);
      sumSst += sstMean.item();
      sumUdt += udtMean.item();
      sumMlm += mlmMean.item();
      sumJoint += joint.item();
      steps += 1;

      backward(joint);
      clipGradNorm(allParams, cfg.clipNorm);
      adam.step();
    }

    const [sigma1, sigma2, sigma3] = uncertainty.sigmaValues();
    const sstAcc = evaluateSstAccuracy(holdout, prepared, encoder, heads);
    metrics.push({
      epoch,
      lSst: sumSst / steps,
      lUdt: sumUdt / steps,
      lMlm: sumMlm / steps,
      lJoint: sumJoint / steps,
      sigma1,
      sigma2,
      sigma3,
      sstAcc,
    });
  }

  const csv = metricsCsv(metrics);
  if (outDir) {
    fs.mkdirSync(outDir, { recursive: true });
    fs.writeFileSync(path.join(outDir, "metrics.csv"), csv);
    saveCheckpoint(path.join(outDir, "checkpoint.json"), namedTensors(encoder, heads, uncertainty), {
      config: cfg,
      vocab: vocab.tokens,
      labels: SST_LABELS,
    });
  }
  return {
    metrics,
    csv,
    vocabSize: vocab.size,
    trainConversations: trainGroups.length,
    holdoutConversations: holdout.length,
  };
}

const NONE_ID = SST_LABELS.indexOf("NONE");

/** Held-out slot accuracy over slots whose gold label is not NONE. */
export function evaluateSstAccuracy(
  holdout: ConversationGroup[],
  prepared: Map<ExampleRecord, PreparedExample>,
  encoder: EncoderParams,
  heads: HeadParams,
): number {
  return noGrad(() => {
    let total = 0;
    let correct = 0;
    for (const group of holdout) {
      for (const example of group.examples) {
        const prep = prepared.get(example)!;
        const encoded = encode(prep.ids, encoder);
        const { logits } = sstLoss(encoded, prep.slotSpans, prep.targets, heads);
        for (let slot = 0; slot < prep.targets.length; slot++) {
          if (prep.targets[slot] === NONE_ID) continue;
          total += 1;
          let best = 0;
          for (let c = 1; c < NUM_SST_LABELS; c++)
            if (logits.at(slot, c) > logits.at(slot, best)) best = c;
          if (best === prep.targets[slot]) correct += 1;
        }
      }
    }
    return total === 0 ? 0 : correct / total;
  });
}

function metricsCsv(metrics: EpochMetrics[]): string {
  const lines = ["epoch,L_sst,L_udt,L_mlm,L_joint,sigma_1,sigma_2,sigma_3,sst_acc"];
  for (const m of metrics) {
    lines.push(
      [
        m.epoch,
        m.lSst.toFixed(6),
        m.lUdt.toFixed(6),
        m.lMlm.toFixed(6),
        m.lJoint.toFixed(6),
        m.sigma1.toFixed(6),
        m.sigma2.toFixed(6),
        m.sigma3.toFixed(6),
        m.sstAcc.toFixed(6),
      ].join(","),
    );
  }
  return lines.join("\n") + "\n";
}

function namedTensors(
  encoder: EncoderParams,
  heads: HeadParams,
  uncertainty: UncertaintyParams,
): Map<string, Tensor> {
  const out = new Map<string, Tensor>();
  out.set("token_embedding", encoder.tokenEmbedding);
  out.set("position_embedding", encoder.positionEmbedding);
  encoder.layers.forEach((layer, i) => {
    out.set(`layer${i}.wqkv`, layer.wqkv);
    out.set(`layer${i}.wo`, layer.wo);
    out.set(`layer${i}.ln1_gain`, layer.ln1Gain);
    out.set(`layer${i}.ln1_bias`, layer.ln1Bias);
    out.set(`layer${i}.ln2_gain`, layer.ln2Gain);
    out.set(`layer${i}.ln2_bias`, layer.ln2Bias);
    out.set(`layer${i}.ffn_w1`, layer.ffnW1);
    out.set(`layer${i}.ffn_b1`, layer.ffnB1);
    out.set(`layer${i}.ffn_w2`, layer.ffnW2);
    out.set(`layer${i}.ffn_b2`, layer.ffnB2);
  });
  out.set("final_gain", encoder.finalGain);
  out.set("final_bias", encoder.finalBias);
  out.set("head.pool_slot_w", heads.poolSlotW);
  out.set("head.pool_slot_v", heads.poolSlotV);
  out.set("head.classifier_w", heads.classifierW);
  out.set("head.classifier_b", heads.classifierB);
  out.set("head.pool_input_w", heads.poolInputW);
  out.set("head.pool_input_v", heads.poolInputV);
  out.set("uncertainty.raw", uncertainty.raw);
  return out;
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

function parseCliConfig(argv: string[]): { examples: string; weights: string; out: string; cfg: TrainConfig } {
  const { values } = parseArgs({
    args: argv,
    options: {
      examples: { type: "string" },
      weights: { type: "string" },
      out: { type: "string", default: "runs/latest" },
      epochs: { type: "string", default: String(DEFAULT_TRAIN.epochs) },
      "batch-size": { type: "string", default: String(DEFAULT_TRAIN.batchSize) },
      lr: { type: "string", default: String(DEFAULT_TRAIN.lr) },
      seed: { type: "string", default: String(DEFAULT_TRAIN.seed) },
      tau: { type: "string", default: String(DEFAULT_TRAIN.tau) },
      "mask-prob": { type: "string", default: String(DEFAULT_TRAIN.maskProb) },
    },
  });
  if (!values.examples || !values.weights) {
    console.error("usage: train --examples <file> --weights <file> [--out dir] ...");
    process.exit(64);
  }
  return {
    examples: values.examples,
    weights: values.weights,
    out: values.out!,
    cfg: {
      ...DEFAULT_TRAIN,
      epochs: Number(values.epochs),
      batchSize: Number(values["batch-size"]),
      lr: Number(values.lr),
      seed: Number(values.seed),
      tau: Number(values.tau),
      maskProb: Number(values["mask-prob"]),
    },
  };
}

export function main(argv: string[]): void {
  const { examples, weights, out, cfg } = parseCliConfig(argv);
  const started = Date.now();
  const result = train(examples, weights, cfg, out);
  const last = result.metrics[result.metrics.length - 1];
  console.log(
    `trained ${cfg.epochs} epochs on ${result.trainConversations} conversations ` +
      `(${result.holdoutConversations} held out, vocab ${result.vocabSize}) in ` +
      `${((Date.now() - started) / 1000).toFixed(1)}s`,
  );
  console.log(
    `final: L_joint=${last.lJoint.toFixed(4)} sst_acc=${last.sstAcc.toFixed(4)} ` +
      `sigmas=(${last.sigma1.toFixed(3)}, ${last.sigma2.toFixed(3)}, ${last.sigma3.toFixed(3)})`,
  );
  console.log(`metrics: ${path.join(out, "metrics.csv")}`);
}
