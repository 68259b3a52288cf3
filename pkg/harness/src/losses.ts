/**
 * The three pre-training objectives and their joint combination:
 * schema-state tracking (per-slot classification from attentively pooled
 * slot spans), weighted contrastive utterance-dependency tracking, masked
 * language modeling, and the homoscedastic-uncertainty joint loss.
 */

import { Rng } from "./rng.js";
import {
  Tensor,
  add,
  addRow,
  addScalar,
  concatRows,
  concatScalars,
  cosine,
  crossEntropyRows,
  div,
  gatherRows,
  log,
  logSumExp,
  matmul,
  mul,
  scale,
  sliceRows,
  softmaxRows,
  softplus,
  sub,
  tanh,
  transpose,
} from "./tensor.js";

/** Fixed SST label space: the clause keywords plus NONE. */
export const SST_LABELS = [
  "SELECT", "FROM", "JOIN", "WHERE", "GROUP_BY", "HAVING", "ORDER_BY", "NONE",
] as const;

export const NUM_SST_LABELS = SST_LABELS.length;

export interface HeadParams {
  poolSlotW: Tensor; // W_1 [d, d]
  poolSlotV: Tensor; // v_1 [1, d]
  classifierW: Tensor; // W_2 [d, C]
  classifierB: Tensor; // b_2 [1, C]
  poolInputW: Tensor; // W_3 [d, d]
  poolInputV: Tensor; // v_3 [1, d]
}

export function initHeadParams(hidden: number, rng: Rng): HeadParams {
  const init = (rows: number, cols: number, std = 0.08) => {
    const t = new Tensor(rows, cols, undefined, true);
    for (let i = 0; i < t.size; i++) t.data[i] = rng.gauss() * std;
    return t;
  };
  return {
    poolSlotW: init(hidden, hidden),
    poolSlotV: init(1, hidden),
    classifierW: init(hidden, NUM_SST_LABELS),
    classifierB: new Tensor(1, NUM_SST_LABELS, undefined, true),
    poolInputW: init(hidden, hidden),
    poolInputV: init(1, hidden),
  };
}

export function headParamList(p: HeadParams): Tensor[] {
  return [p.poolSlotW, p.poolSlotV, p.classifierW, p.classifierB, p.poolInputW, p.poolInputV];
}

/**
 * Attentive pooling: softmax_j(tanh(h_j W) v^T) weighted sum of the span.
 */
export function attentivePool(span: Tensor, w: Tensor, v: Tensor): Tensor {
  if (span.rows < 1) throw new Error("attentivePool: empty span");
  const scores = transpose(matmul(tanh(matmul(span, w)), transpose(v))); // [1, n]
  const weights = softmaxRows(scores);
  return matmul(weights, span); // [1, d]
}

/**
 * SST: per-slot logits from the pooled previous-state span representations.
 * Returns the mean cross-entropy and the raw logits for accuracy probes.
 */
export function sstLoss(
  encoded: Tensor,
  slotSpans: Array<[number, number]>,
  targets: number[],
  params: HeadParams,
): { loss: Tensor; logits: Tensor } {
  if (slotSpans.length !== targets.length)
    throw new Error("sstLoss: one target per slot span required");
  const rows: Tensor[] = [];
  for (const [start, end] of slotSpans) {
    const pooled = attentivePool(sliceRows(encoded, start, end), params.poolSlotW, params.poolSlotV);
    rows.push(addRow(matmul(pooled, params.classifierW), params.classifierB));
  }
  const logits = concatRows(rows); // [m, C]
  return { loss: crossEntropyRows(logits, targets), logits };
}

export interface UdtAnchor {
  pooled: Tensor; // h~ for the anchor turn
  positives: Array<{ pooled: Tensor; weight: number }>; // same-conversation turns
  negatives: Tensor[]; // pooled turns from other conversations
}

/**
 * Weighted contrastive loss over pooled turn representations.
 *
 * Per anchor x and positive p: -w(x,p) * log( e^{sim(x,p)/tau} /
 * (e^{sim(x,p)/tau} + sum_m e^{sim(x,m)/tau}) ). The negative set for the
 * pair (x, p) is the anchor's other positives plus turns from other
 * conversations, so the denominator covers all positives of x plus the
 * cross-conversation negatives. Returns the plain sum and the pair count
 * so callers can normalize per anchor pair.
 */
export function udtLoss(anchors: UdtAnchor[], tau: number): { loss: Tensor; terms: number } {
  if (tau <= 0) throw new Error("temperature must be positive");
  let total: Tensor | null = null;
  let terms = 0;
  for (const anchor of anchors) {
    if (anchor.positives.length === 0) throw new Error("udtLoss: anchor without positives");
    const positiveSims = anchor.positives.map((p) =>
      scale(cosine(anchor.pooled, p.pooled), 1 / tau),
    );
    const negativeSims = anchor.negatives.map((neg) =>
      scale(cosine(anchor.pooled, neg), 1 / tau),
    );
    const denominator = logSumExp(concatScalars([...positiveSims, ...negativeSims]));
    for (let j = 0; j < anchor.positives.length; j++) {
      const weight = anchor.positives[j].weight;
      if (weight === 0) continue;
      const term = scale(sub(denominator, positiveSims[j]), weight);
      total = total === null ? term : add(total, term);
      terms += 1;
    }
  }
  return { loss: total ?? Tensor.scalar(0), terms };
}

/**
 * MLM: mask candidate positions at maskProb, re-encode, and score the
 * original ids at masked positions against the tied embedding matrix.
 *
 * Masking happens before encoding, so this returns the masked ids for the
 * caller to encode; the loss half operates on the encoded output.
 */
export function sampleMask(
  tokenIds: number[],
  candidates: number[],
  maskProb: number,
  maskId: number,
  rng: Rng,
): { maskedIds: number[]; maskedPositions: number[] } {
  if (maskProb <= 0 || maskProb >= 1) throw new Error("mask probability must be in (0,1)");
  const maskedIds = tokenIds.slice();
  const maskedPositions: number[] = [];
  for (const pos of candidates) {
    if (rng.bernoulli(maskProb)) {
      maskedIds[pos] = maskId;
      maskedPositions.push(pos);
    }
  }
  return { maskedIds, maskedPositions };
}

export function mlmLoss(
  encoded: Tensor,
  maskedPositions: number[],
  originalIds: number[],
  tokenEmbedding: Tensor,
): { loss: Tensor; count: number } {
  if (maskedPositions.length === 0) return { loss: Tensor.scalar(0), count: 0 };
  const selected = gatherRows(encoded, maskedPositions);
  const logits = matmul(selected, transpose(tokenEmbedding)); // [n, V]
  const targets = maskedPositions.map((pos) => originalIds[pos]);
  return { loss: crossEntropyRows(logits, targets), count: maskedPositions.length };
}

/**
 * Observation-noise scalars sigma_i > 0, parameterized through softplus of
 * unconstrained reals.
 */
export class UncertaintyParams {
  raw: Tensor; // [1, 3]

  constructor(initialSigma = 1.0) {
    this.raw = new Tensor(1, 3, undefined, true);
    // softplus(raw) = sigma  =>  raw = log(e^sigma - 1)
    this.raw.data.fill(Math.log(Math.expm1(initialSigma)));
  }

  sigmas(): Tensor {
    return softplus(this.raw); // [1, 3]
  }

  sigmaValues(): [number, number, number] {
    const s = this.raw.data;
    const sp = (x: number) => (x > 30 ? x : Math.log1p(Math.exp(x)));
    return [sp(s[0]), sp(s[1]), sp(s[2])];
  }
}

/**
 * Joint homoscedastic-uncertainty combination:
 * sum_i L_i / (2 sigma_i^2) + sum_i log(1 + sigma_i).
 */
export function jointLoss(
  lSst: Tensor,
  lUdt: Tensor,
  lMlm: Tensor,
  uncertainty: UncertaintyParams,
): Tensor {
  const sigmas = uncertainty.sigmas(); // [1, 3]
  const losses = [lSst, lUdt, lMlm];
  let total: Tensor | null = null;
  for (let i = 0; i < 3; i++) {
    const sigma = sliceRows(transpose(sigmas), i, i + 1); // [1, 1]
    const invTwoSigmaSq = scale(div(Tensor.scalar(1), mul(sigma, sigma)), 0.5);
    const weighted = mul(losses[i], invTwoSigmaSq);
    const regularizer = log(addScalar(sigma, 1));
    const term = add(weighted, regularizer);
    total = total === null ? term : add(total, term);
  }
  return total!;
}
