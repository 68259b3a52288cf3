import { describe, expect, test } from "vitest";

import {
  NUM_SST_LABELS,
  UdtAnchor,
  UncertaintyParams,
  attentivePool,
  initHeadParams,
  jointLoss,
  mlmLoss,
  sampleMask,
  sstLoss,
  udtLoss,
} from "../src/losses.js";
import { encode, EncoderParams } from "../src/encoder.js";
import { Rng } from "../src/rng.js";
import { Tensor } from "../src/tensor.js";

function randTensor(rows: number, cols: number, rng: Rng): Tensor {
  const t = new Tensor(rows, cols);
  for (let i = 0; i < t.size; i++) t.data[i] = rng.gauss();
  return t;
}

describe("sstLoss", () => {
  test("uniform logits give ln C per slot", () => {
    const rng = new Rng(1);
    const d = 8;
    const heads = initHeadParams(d, rng);
    heads.classifierW.data.fill(0); // logits all zero -> uniform distribution
    heads.classifierB.data.fill(0);
    const encoded = randTensor(12, d, rng);
    const spans: Array<[number, number]> = [[0, 3], [3, 6], [6, 9]];
    const { loss } = sstLoss(encoded, spans, [0, 3, 7], heads);
    expect(loss.item()).toBeCloseTo(Math.log(NUM_SST_LABELS), 6);
  });

  test("confident correct logits give near-zero loss", () => {
    const rng = new Rng(2);
    const d = 4;
    const heads = initHeadParams(d, rng);
    const encoded = new Tensor(2, d);
    encoded.data.fill(1);
    // rig the classifier so the gold label gets a huge logit
    heads.classifierW.data.fill(0);
    heads.classifierB.data.fill(0);
    heads.classifierB.data[2] = 50;
    const { loss } = sstLoss(encoded, [[0, 2]], [2], heads);
    expect(loss.item()).toBeLessThan(1e-6);
  });

  test("matches an independent scalar recomputation", () => {
    const rng = new Rng(3);
    const d = 6;
    const heads = initHeadParams(d, rng);
    const encoded = randTensor(9, d, rng);
    const spans: Array<[number, number]> = [[0, 2], [4, 7]];
    const targets = [1, 5];
    const { loss, logits } = sstLoss(encoded, spans, targets, heads);
    let expected = 0;
    for (let s = 0; s < 2; s++) {
      let max = -Infinity;
      for (let c = 0; c < NUM_SST_LABELS; c++) max = Math.max(max, logits.at(s, c));
      let z = 0;
      for (let c = 0; c < NUM_SST_LABELS; c++) z += Math.exp(logits.at(s, c) - max);
      expected += Math.log(z) + max - logits.at(s, targets[s]);
    }
    expect(loss.item()).toBeCloseTo(expected / 2, 10);
  });

  test("span/target count mismatch is rejected", () => {
    const rng = new Rng(4);
    const heads = initHeadParams(4, rng);
    expect(() => sstLoss(randTensor(4, 4, rng), [[0, 2]], [1, 2], heads)).toThrow();
  });
});

describe("udtLoss", () => {
  const tau = 0.07;

  test("one positive and zero negatives give exactly zero", () => {
    const rng = new Rng(5);
    const anchor: UdtAnchor = {
      pooled: randTensor(1, 8, rng),
      positives: [{ pooled: randTensor(1, 8, rng), weight: 1.0 }],
      negatives: [],
    };
    const { loss, terms } = udtLoss([anchor], tau);
    expect(loss.item()).toBe(0);
    expect(terms).toBe(1);
  });

  test("equidistant positive and negative give ln 2", () => {
    const rng = new Rng(6);
    const pooled = randTensor(1, 8, rng);
    const other = randTensor(1, 8, rng);
    const anchor: UdtAnchor = {
      pooled,
      positives: [{ pooled: other, weight: 1.0 }],
      negatives: [other], // identical candidate -> identical similarity
    };
    const { loss } = udtLoss([anchor], tau);
    expect(loss.item()).toBeCloseTo(Math.log(2), 9);
  });

  test("matches an independent scalar recomputation on a 3-conversation batch", () => {
    const rng = new Rng(7);
    const d = 6;
    const convs = [0, 1, 2].map(() => [randTensor(1, d, rng), randTensor(1, d, rng)]);
    const weights = [
      [0, 1, 1, 0],
      [0, 0.7, 0.3, 0], // unused filler to vary weights below
    ];
    const cos = (a: Tensor, b: Tensor) => {
      let dot = 0, na = 0, nb = 0;
      for (let i = 0; i < d; i++) {
        dot += a.data[i] * b.data[i];
        na += a.data[i] * a.data[i];
        nb += b.data[i] * b.data[i];
      }
      return dot / (Math.sqrt(na) * Math.sqrt(nb) + 1e-12);
    };
    const anchors: UdtAnchor[] = [];
    let expected = 0;
    for (let ci = 0; ci < 3; ci++) {
      const [a, b] = convs[ci];
      const negatives = convs.filter((_, o) => o !== ci).flat();
      for (const [x, p] of [[a, b], [b, a]] as const) {
        const weight = 1.0;
        anchors.push({ pooled: x, positives: [{ pooled: p, weight }], negatives });
        const sims = [cos(x, p) / tau, ...negatives.map((m) => cos(x, m) / tau)];
        const max = Math.max(...sims);
        const lse = max + Math.log(sims.reduce((acc, s) => acc + Math.exp(s - max), 0));
        expected += weight * (lse - sims[0]);
      }
    }
    const { loss, terms } = udtLoss(anchors, tau);
    expect(terms).toBe(6);
    expect(loss.item()).toBeCloseTo(expected, 9);
    expect(weights.length).toBe(2);
  });

  test("loss decreases when the positive moves closer to the anchor", () => {
    const rng = new Rng(8);
    const d = 8;
    const anchorVec = randTensor(1, d, rng);
    const negative = randTensor(1, d, rng);
    const losses: number[] = [];
    for (const blend of [0.0, 0.5, 0.9]) {
      const positive = new Tensor(1, d);
      const away = randTensor(1, d, new Rng(42));
      for (let i = 0; i < d; i++)
        positive.data[i] = blend * anchorVec.data[i] + (1 - blend) * away.data[i];
      const { loss } = udtLoss(
        [{ pooled: anchorVec, positives: [{ pooled: positive, weight: 1 }], negatives: [negative] }],
        tau,
      );
      losses.push(loss.item());
    }
    expect(losses[1]).toBeLessThan(losses[0]);
    expect(losses[2]).toBeLessThan(losses[1]);
  });

  test("anchor without positives is rejected; zero-weight pairs are skipped", () => {
    const rng = new Rng(9);
    expect(() =>
      udtLoss([{ pooled: randTensor(1, 4, rng), positives: [], negatives: [] }], tau),
    ).toThrow();
    const { terms } = udtLoss(
      [
        {
          pooled: randTensor(1, 4, rng),
          positives: [
            { pooled: randTensor(1, 4, rng), weight: 0 },
            { pooled: randTensor(1, 4, rng), weight: 1 },
          ],
          negatives: [],
        },
      ],
      tau,
    );
    expect(terms).toBe(1);
  });

  test("non-positive temperature is rejected", () => {
    expect(() => udtLoss([], 0)).toThrow(/temperature/);
  });
});

describe("mlmLoss + sampleMask", () => {
  test("uniform output distribution gives ln V per token", () => {
    const V = 23;
    const d = 6;
    const embedding = new Tensor(V, d); // zeros -> all logits zero -> uniform
    const rng = new Rng(10);
    const encoded = randTensor(5, d, rng);
    const { loss, count } = mlmLoss(encoded, [1, 3], [4, 9, 2, 17, 8], embedding);
    expect(count).toBe(2);
    expect(loss.item()).toBeCloseTo(Math.log(V), 9);
  });

  test("zero masked positions give loss 0 with count 0", () => {
    const rng = new Rng(11);
    const { loss, count } = mlmLoss(randTensor(3, 4, rng), [], [0, 1, 2], randTensor(9, 4, rng));
    expect(count).toBe(0);
    expect(loss.item()).toBe(0);
  });

  test("perfect predictions give near-zero loss", () => {
    const V = 4;
    const d = 4;
    const embedding = new Tensor(V, d);
    for (let i = 0; i < V; i++) embedding.data[i * d + i] = 60; // orthogonal one-hots
    const ids = [2, 0];
    const encoded = new Tensor(2, d);
    encoded.data[2] = 1; // row 0 aligned with vocab 2
    encoded.data[d] = 1; // row 1 aligned with vocab 0
    const { loss } = mlmLoss(encoded, [0, 1], ids, embedding);
    expect(loss.item()).toBeLessThan(1e-6);
  });

  test("masked fraction approaches the mask probability", () => {
    const rng = new Rng(12);
    const candidates = Array.from({ length: 20 }, (_, i) => i);
    const ids = Array.from({ length: 20 }, () => 5);
    let masked = 0;
    const trials = 10_000;
    for (let t = 0; t < trials; t++) {
      masked += sampleMask(ids, candidates, 0.15, 99, rng).maskedPositions.length;
    }
    const fraction = masked / (trials * candidates.length);
    expect(Math.abs(fraction - 0.15)).toBeLessThan(0.005);
  });

  test("mask replaces only candidate positions", () => {
    const rng = new Rng(13);
    const ids = [1, 2, 3, 4, 5];
    const { maskedIds, maskedPositions } = sampleMask(ids, [1, 3], 0.999, 0, rng);
    expect(maskedPositions.sort()).toEqual([1, 3]);
    expect(maskedIds[0]).toBe(1);
    expect(maskedIds[2]).toBe(3);
    expect(maskedIds[1]).toBe(0);
    expect(maskedIds[4]).toBe(5);
  });

  test("out-of-range probability is rejected", () => {
    const rng = new Rng(14);
    expect(() => sampleMask([1], [0], 0, 9, rng)).toThrow();
    expect(() => sampleMask([1], [0], 1, 9, rng)).toThrow();
  });
});

describe("jointLoss", () => {
  test("sigma=1 everywhere gives half loss sum plus 3 ln 2", () => {
    const u = new UncertaintyParams(1.0);
    const loss = jointLoss(Tensor.scalar(1.2), Tensor.scalar(0.4), Tensor.scalar(2.0), u);
    expect(loss.item()).toBeCloseTo(0.5 * (1.2 + 0.4 + 2.0) + 3 * Math.log(2), 9);
  });

  test("all-zero losses at sigma=1 give exactly 3 ln 2", () => {
    const u = new UncertaintyParams(1.0);
    const loss = jointLoss(Tensor.scalar(0), Tensor.scalar(0), Tensor.scalar(0), u);
    expect(loss.item()).toBeCloseTo(3 * Math.log(2), 9);
  });

  test("matches symbolic substitution over 100 random tuples", () => {
    const rng = new Rng(15);
    for (let trial = 0; trial < 100; trial++) {
      const u = new UncertaintyParams(1.0);
      for (let i = 0; i < 3; i++) u.raw.data[i] = rng.gauss();
      const losses = [0, 1, 2].map(() => Math.abs(rng.gauss()) * 3);
      const sigmas = [...u.raw.data].map((x) => Math.log1p(Math.exp(x)));
      let expected = 0;
      for (let i = 0; i < 3; i++)
        expected += losses[i] / (2 * sigmas[i] * sigmas[i]) + Math.log(1 + sigmas[i]);
      const got = jointLoss(
        Tensor.scalar(losses[0]), Tensor.scalar(losses[1]), Tensor.scalar(losses[2]), u,
      );
      expect(got.item()).toBeCloseTo(expected, 9);
    }
  });

  test("sigmas stay positive under the softplus transform", () => {
    const u = new UncertaintyParams(1.0);
    u.raw.data.fill(-40); // extreme raw values
    for (const sigma of u.sigmaValues()) expect(sigma).toBeGreaterThan(0);
  });

  test("joint loss is bounded below by the regularizer for non-negative losses", () => {
    const rng = new Rng(16);
    for (let trial = 0; trial < 20; trial++) {
      const u = new UncertaintyParams(Math.abs(rng.gauss()) + 0.2);
      const [s1, s2, s3] = u.sigmaValues();
      const floor = Math.log(1 + s1) + Math.log(1 + s2) + Math.log(1 + s3);
      const loss = jointLoss(
        Tensor.scalar(Math.abs(rng.gauss())),
        Tensor.scalar(Math.abs(rng.gauss())),
        Tensor.scalar(Math.abs(rng.gauss())),
        u,
      );
      expect(loss.item()).toBeGreaterThanOrEqual(floor - 1e-12);
    }
  });
});

describe("encode", () => {
  const config = { vocabSize: 30, hidden: 16, layers: 2, heads: 2, ffnHidden: 16, maxLen: 12 };

  test("produces one vector per token", () => {
    const params = new EncoderParams(config, new Rng(17));
    const out = encode([1, 2, 3, 4, 5], params);
    expect(out.rows).toBe(5);
    expect(out.cols).toBe(16);
  });

  test("deterministic for identical inputs", () => {
    const params = new EncoderParams(config, new Rng(18));
    const a = encode([3, 1, 4, 1, 5], params);
    const b = encode([3, 1, 4, 1, 5], params);
    expect([...a.data]).toEqual([...b.data]);
  });

  test("position-sensitive: permuting two tokens changes the output", () => {
    const params = new EncoderParams(config, new Rng(19));
    const a = encode([3, 1, 4, 1, 5], params);
    const b = encode([1, 3, 4, 1, 5], params);
    let delta = 0;
    for (let i = 0; i < a.size; i++) delta = Math.max(delta, Math.abs(a.data[i] - b.data[i]));
    expect(delta).toBeGreaterThan(1e-6);
  });

  test("unknown token id and overlong input are rejected", () => {
    const params = new EncoderParams(config, new Rng(20));
    expect(() => encode([29, 30], params)).toThrow(/vocabulary/);
    expect(() => encode(Array(13).fill(1), params)).toThrow(/length/);
  });
});
