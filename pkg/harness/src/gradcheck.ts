/**
 * Central-finite-difference verification of analytic gradients.
 */

import { Rng } from "./rng.js";
import { Tensor, backward, noGrad, resetTape } from "./tensor.js";

export interface GradCheckResult {
  maxRelativeError: number;
  checkedCoordinates: number;
}

/**
 * Compare analytic gradients of lossFn w.r.t. params against central
 * differences on sampled coordinates.
 *
 * Relative error uses a denominator floor so coordinates whose true
 * gradient is zero are judged on the absolute scale of the difference
 * quotient noise rather than blowing up.
 */
export function gradientCheck(
  lossFn: () => Tensor,
  params: Tensor[],
  rng: Rng,
  samples = 50,
  eps = 1e-5,
): GradCheckResult {
  resetTape();
  for (const p of params) p.zeroGrad();
  backward(lossFn());
  const analytic = params.map((p) => Float64Array.from(p.grad!));

  const coords: Array<[number, number]> = [];
  for (let pi = 0; pi < params.length; pi++)
    for (let i = 0; i < params[pi].size; i++) coords.push([pi, i]);
  const picked: Array<[number, number]> = [];
  const want = Math.min(samples, coords.length);
  const pool = coords.slice();
  for (let i = 0; i < want; i++) {
    const j = rng.int(pool.length);
    picked.push(pool[j]);
    pool.splice(j, 1);
  }

  let maxRel = 0;
  for (const [pi, idx] of picked) {
    const param = params[pi];
    const original = param.data[idx];
    param.data[idx] = original + eps;
    const plus = noGrad(lossFn).item();
    param.data[idx] = original - eps;
    const minus = noGrad(lossFn).item();
    param.data[idx] = original;
    const numeric = (plus - minus) / (2 * eps);
    const a = analytic[pi][idx];
    const rel = Math.abs(a - numeric) / Math.max(Math.abs(a), Math.abs(numeric), 1e-3);
    maxRel = Math.max(maxRel, rel);
  }
  return { maxRelativeError: maxRel, checkedCoordinates: picked.length };
}
