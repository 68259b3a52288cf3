/**
 * Tiny pre-LN transformer encoder: token + position embeddings, a short
 * stack of multi-head self-attention layers, and a final LayerNorm.
 */

import { Rng } from "./rng.js";
import {
  Tensor,
  add,
  addRow,
  concatCols,
  gatherRows,
  layerNormRows,
  matmul,
  relu,
  scale,
  sliceCols,
  sliceRows,
  softmaxRows,
  transpose,
} from "./tensor.js";

export interface EncoderConfig {
  vocabSize: number;
  hidden: number; // width d
  layers: number;
  heads: number;
  ffnHidden: number;
  maxLen: number;
}

export const DEFAULT_ENCODER: Omit<EncoderConfig, "vocabSize" | "maxLen"> = {
  hidden: 64,
  layers: 2,
  heads: 2,
  ffnHidden: 32,
};

interface LayerParams {
  wqkv: Tensor; // fused [d, 3d] query/key/value projection
  wo: Tensor;
  ln1Gain: Tensor;
  ln1Bias: Tensor;
  ln2Gain: Tensor;
  ln2Bias: Tensor;
  ffnW1: Tensor;
  ffnB1: Tensor;
  ffnW2: Tensor;
  ffnB2: Tensor;
}

export class EncoderParams {
  readonly config: EncoderConfig;
  tokenEmbedding: Tensor; // [V, d], also the tied MLM output matrix
  positionEmbedding: Tensor; // [maxLen, d]
  layers: LayerParams[];
  finalGain: Tensor;
  finalBias: Tensor;

  constructor(config: EncoderConfig, rng: Rng) {
    if (config.hidden % config.heads !== 0)
      throw new Error("hidden width must divide evenly into heads");
    this.config = config;
    const d = config.hidden;
    const std = 0.08;
    const init = (rows: number, cols: number, s = std) => {
      const t = new Tensor(rows, cols, undefined, true);
      for (let i = 0; i < t.size; i++) t.data[i] = rng.gauss() * s;
      return t;
    };
    const ones = (cols: number) => {
      const t = new Tensor(1, cols, undefined, true);
      t.data.fill(1);
      return t;
    };
    const zeros = (cols: number) => new Tensor(1, cols, undefined, true);

    this.tokenEmbedding = init(config.vocabSize, d);
    this.positionEmbedding = init(config.maxLen, d);
    this.layers = [];
    for (let l = 0; l < config.layers; l++) {
      this.layers.push({
        wqkv: init(d, 3 * d),
        wo: init(d, d),
        ln1Gain: ones(d),
        ln1Bias: zeros(d),
        ln2Gain: ones(d),
        ln2Bias: zeros(d),
        ffnW1: init(d, config.ffnHidden),
        ffnB1: zeros(config.ffnHidden),
        ffnW2: init(config.ffnHidden, d),
        ffnB2: zeros(d),
      });
    }
    this.finalGain = ones(d);
    this.finalBias = zeros(d);
  }

  all(): Tensor[] {
    const out = [this.tokenEmbedding, this.positionEmbedding];
    for (const layer of this.layers)
      out.push(
        layer.wqkv, layer.wo,
        layer.ln1Gain, layer.ln1Bias, layer.ln2Gain, layer.ln2Bias,
        layer.ffnW1, layer.ffnB1, layer.ffnW2, layer.ffnB2,
      );
    out.push(this.finalGain, this.finalBias);
    return out;
  }
}

function attention(x: Tensor, layer: LayerParams, heads: number): Tensor {
  const L = x.rows;
  const d = x.cols;
  const dk = d / heads;
  const qkv = matmul(x, layer.wqkv); // [L, 3d]
  const headOut: Tensor[] = [];
  for (let h = 0; h < heads; h++) {
    const qh = sliceCols(qkv, h * dk, (h + 1) * dk);
    const kh = sliceCols(qkv, d + h * dk, d + (h + 1) * dk);
    const vh = sliceCols(qkv, 2 * d + h * dk, 2 * d + (h + 1) * dk);
    const scores = scale(matmul(qh, transpose(kh)), 1 / Math.sqrt(dk)); // [L, L]
    const weights = softmaxRows(scores);
    headOut.push(matmul(weights, vh)); // [L, dk]
  }
  const merged = heads === 1 ? headOut[0] : concatCols(headOut);
  if (merged.rows !== L || merged.cols !== d) throw new Error("head merge shape error");
  return matmul(merged, layer.wo);
}

/** Encode token ids into one contextual vector per token ([L, d]). */
export function encode(tokenIds: number[], params: EncoderParams): Tensor {
  const { maxLen, heads } = params.config;
  if (tokenIds.length > maxLen)
    throw new Error(`input length ${tokenIds.length} exceeds maximum ${maxLen}`);
  for (const id of tokenIds)
    if (id < 0 || id >= params.config.vocabSize)
      throw new Error(`token id ${id} outside vocabulary`);
  const tok = gatherRows(params.tokenEmbedding, tokenIds);
  const pos = sliceRows(params.positionEmbedding, 0, tokenIds.length);
  let x = add(tok, pos);
  for (const layer of params.layers) {
    const normed1 = layerNormRows(x, layer.ln1Gain, layer.ln1Bias);
    x = add(x, attention(normed1, layer, heads));
    const normed2 = layerNormRows(x, layer.ln2Gain, layer.ln2Bias);
    const ffn = matmul(
      relu(addRow(matmul(normed2, layer.ffnW1), layer.ffnB1)),
      layer.ffnW2,
    );
    x = add(x, addRow(ffn, layer.ffnB2));
  }
  return layerNormRows(x, params.finalGain, params.finalBias);
}
