/**
 * Minimal tape-based reverse-mode autodiff over Float64Array matrices.
 *
 * Every tensor is 2-D ([rows, cols]); vectors are [1, n] rows and scalars
 * [1, 1]. Operations record a backward closure on a global tape; backward()
 * replays the tape in reverse. Enough machinery for a tiny transformer,
 * attentive pooling, and the three pre-training losses.
 */

export class Tensor {
  data: Float64Array;
  grad: Float64Array | null = null;
  readonly rows: number;
  readonly cols: number;
  readonly requiresGrad: boolean;

  constructor(rows: number, cols: number, data?: Float64Array, requiresGrad = false) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    this.requiresGrad = requiresGrad;
    if (requiresGrad) this.grad = new Float64Array(rows * cols);
  }

  get size(): number {
    return this.rows * this.cols;
  }

  at(r: number, c: number): number {
    return this.data[r * this.cols + c];
  }

  item(): number {
    if (this.size !== 1) throw new Error(`item() on tensor of size ${this.size}`);
    return this.data[0];
  }

  zeroGrad(): void {
    if (this.grad) this.grad.fill(0);
  }

  static fromArray(values: number[][], requiresGrad = false): Tensor {
    const rows = values.length;
    const cols = values[0].length;
    const t = new Tensor(rows, cols, undefined, requiresGrad);
    for (let r = 0; r < rows; r++)
      for (let c = 0; c < cols; c++) t.data[r * cols + c] = values[r][c];
    return t;
  }

  static scalar(value: number, requiresGrad = false): Tensor {
    const t = new Tensor(1, 1, undefined, requiresGrad);
    t.data[0] = value;
    return t;
  }
}

type BackwardFn = () => void;

let tape: BackwardFn[] = [];
let taping = true;

export function resetTape(): void {
  tape = [];
}

/** Run fn without recording backward closures (evaluation passes). */
export function noGrad<T>(fn: () => T): T {
  const prev = taping;
  taping = false;
  try {
    return fn();
  } finally {
    taping = prev;
  }
}

function record(out: Tensor, fn: BackwardFn): Tensor {
  if (taping) {
    if (!out.grad) out.grad = new Float64Array(out.size);
    tape.push(fn);
  }
  return out;
}

function needsTape(...inputs: Tensor[]): boolean {
  return taping && inputs.some((t) => t.grad !== null);
}

/** Seed d(loss)/d(loss)=1 and replay the tape backwards. */
export function backward(loss: Tensor): void {
  if (loss.size !== 1) throw new Error("backward() expects a scalar loss");
  if (!loss.grad) loss.grad = new Float64Array(1);
  loss.grad[0] = 1;
  for (let i = tape.length - 1; i >= 0; i--) tape[i]();
  tape = [];
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/** C[m,n] += A[m,k] B[k,n] over raw arrays, 4x-unrolled inner loop. */
function gemmAcc(
  c: Float64Array, a: Float64Array, b: Float64Array,
  m: number, k: number, n: number,
): void {
  const n4 = n - (n % 4);
  for (let i = 0; i < m; i++) {
    const arow = i * k;
    const crow = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[arow + p];
      const brow = p * n;
      let j = 0;
      for (; j < n4; j += 4) {
        c[crow + j] += av * b[brow + j];
        c[crow + j + 1] += av * b[brow + j + 1];
        c[crow + j + 2] += av * b[brow + j + 2];
        c[crow + j + 3] += av * b[brow + j + 3];
      }
      for (; j < n; j++) c[crow + j] += av * b[brow + j];
    }
  }
}

/** C[m,k] += G[m,n] B^T (i.e. row dot products), for matmul backward. */
function gemmBt(
  c: Float64Array, g: Float64Array, b: Float64Array,
  m: number, k: number, n: number,
): void {
  const n4 = n - (n % 4);
  for (let i = 0; i < m; i++) {
    const grow = i * n;
    const crow = i * k;
    for (let p = 0; p < k; p++) {
      const brow = p * n;
      let acc = 0;
      let j = 0;
      for (; j < n4; j += 4) {
        acc +=
          g[grow + j] * b[brow + j] +
          g[grow + j + 1] * b[brow + j + 1] +
          g[grow + j + 2] * b[brow + j + 2] +
          g[grow + j + 3] * b[brow + j + 3];
      }
      for (; j < n; j++) acc += g[grow + j] * b[brow + j];
      c[crow + p] += acc;
    }
  }
}

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) throw new Error(`matmul shape mismatch ${a.cols} vs ${b.rows}`);
  const m = a.rows, k = a.cols, n = b.cols;
  const out = new Tensor(m, n);
  gemmAcc(out.data, a.data, b.data, m, k, n);
  if (!needsTape(a, b)) return out;
  return record(out, () => {
    const og = out.grad!;
    if (a.grad) gemmBt(a.grad, og, b.data, m, k, n);
    // B_grad[k,n] += A^T G, walked row-major in A for sequential reads
    if (b.grad) gemmAtB(b.grad, a.data, og, m, k, n);
  });
}

/** C[k,n] += A^T[k,m] G[m,n], traversing A row-major. */
function gemmAtB(
  c: Float64Array, a: Float64Array, g: Float64Array,
  m: number, k: number, n: number,
): void {
  const n4 = n - (n % 4);
  for (let i = 0; i < m; i++) {
    const arow = i * k;
    const grow = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[arow + p];
      const crow = p * n;
      let j = 0;
      for (; j < n4; j += 4) {
        c[crow + j] += av * g[grow + j];
        c[crow + j + 1] += av * g[grow + j + 1];
        c[crow + j + 2] += av * g[grow + j + 2];
        c[crow + j + 3] += av * g[grow + j + 3];
      }
      for (; j < n; j++) c[crow + j] += av * g[grow + j];
    }
  }
}

export function transpose(a: Tensor): Tensor {
  const out = new Tensor(a.cols, a.rows);
  for (let r = 0; r < a.rows; r++)
    for (let c = 0; c < a.cols; c++) out.data[c * a.rows + r] = a.data[r * a.cols + c];
  if (!needsTape(a)) return out;
  return record(out, () => {
    const ag = a.grad;
    if (!ag) return;
    const og = out.grad!;
    for (let r = 0; r < a.rows; r++)
      for (let c = 0; c < a.cols; c++) ag[r * a.cols + c] += og[c * a.rows + r];
  });
}

// ---------------------------------------------------------------------------
// Elementwise and broadcast ops
// ---------------------------------------------------------------------------

function sameShape(a: Tensor, b: Tensor, op: string): void {
  if (a.rows !== b.rows || a.cols !== b.cols)
    throw new Error(`${op}: shape mismatch [${a.rows},${a.cols}] vs [${b.rows},${b.cols}]`);
}

export function add(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "add");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] + b.data[i];
  if (!needsTape(a, b)) return out;
  return record(out, () => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < a.size; i++) a.grad[i] += og[i];
    if (b.grad) for (let i = 0; i < b.size; i++) b.grad[i] += og[i];
  });
}

export function sub(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "sub");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] - b.data[i];
  if (!needsTape(a, b)) return out;
  return record(out, () => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < a.size; i++) a.grad[i] += og[i];
    if (b.grad) for (let i = 0; i < b.size; i++) b.grad[i] -= og[i];
  });
}

export function mul(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "mul");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] * b.data[i];
  if (!needsTape(a, b)) return out;
  return record(out, () => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < a.size; i++) a.grad[i] += og[i] * b.data[i];
    if (b.grad) for (let i = 0; i < b.size; i++) b.grad[i] += og[i] * a.data[i];
  });
}

export function div(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "div");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] / b.data[i];
  if (!needsTape(a, b)) return out;
  return record(out, () => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < a.size; i++) a.grad[i] += og[i] / b.data[i];
    if (b.grad)
      for (let i = 0; i < b.size; i++)
        b.grad[i] -= (og[i] * a.data[i]) / (b.data[i] * b.data[i]);
  });
}

export function scale(a: Tensor, s: number): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] * s;
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (a.grad) for (let i = 0; i < a.size; i++) a.grad[i] += out.grad![i] * s;
  });
}

export function addScalar(a: Tensor, s: number): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] + s;
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (a.grad) for (let i = 0; i < a.size; i++) a.grad[i] += out.grad![i];
  });
}

/** Broadcast-add a [1, n] row vector to every row of a. */
export function addRow(a: Tensor, row: Tensor): Tensor {
  if (row.rows !== 1 || row.cols !== a.cols) throw new Error("addRow: bad row shape");
  const out = new Tensor(a.rows, a.cols);
  for (let r = 0; r < a.rows; r++)
    for (let c = 0; c < a.cols; c++)
      out.data[r * a.cols + c] = a.data[r * a.cols + c] + row.data[c];
  if (!needsTape(a, row)) return out;
  return record(out, () => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < a.size; i++) a.grad[i] += og[i];
    if (row.grad)
      for (let r = 0; r < a.rows; r++)
        for (let c = 0; c < a.cols; c++) row.grad[c] += og[r * a.cols + c];
  });
}

export function tanh(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = Math.tanh(a.data[i]);
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let i = 0; i < a.size; i++)
      a.grad[i] += out.grad![i] * (1 - out.data[i] * out.data[i]);
  });
}

export function relu(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] > 0 ? a.data[i] : 0;
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let i = 0; i < a.size; i++) if (a.data[i] > 0) a.grad[i] += out.grad![i];
  });
}

export function log(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = Math.log(a.data[i]);
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let i = 0; i < a.size; i++) a.grad[i] += out.grad![i] / a.data[i];
  });
}

/** Numerically safe softplus: log(1 + e^x). */
export function softplus(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) {
    const x = a.data[i];
    out.data[i] = x > 30 ? x : Math.log1p(Math.exp(x));
  }
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let i = 0; i < a.size; i++)
      a.grad[i] += out.grad![i] / (1 + Math.exp(-a.data[i]));
  });
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

export function sliceRows(a: Tensor, start: number, end: number): Tensor {
  const n = end - start;
  const out = new Tensor(n, a.cols);
  out.data.set(a.data.subarray(start * a.cols, end * a.cols));
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let i = 0; i < out.size; i++) a.grad[start * a.cols + i] += out.grad![i];
  });
}

export function sliceCols(a: Tensor, start: number, end: number): Tensor {
  const n = end - start;
  const out = new Tensor(a.rows, n);
  for (let r = 0; r < a.rows; r++)
    for (let c = 0; c < n; c++) out.data[r * n + c] = a.data[r * a.cols + start + c];
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let r = 0; r < a.rows; r++)
      for (let c = 0; c < n; c++) a.grad[r * a.cols + start + c] += out.grad![r * n + c];
  });
}

/** Concatenate equal-height blocks side by side. */
export function concatCols(parts: Tensor[]): Tensor {
  const rows = parts[0].rows;
  const cols = parts.reduce((acc, p) => acc + p.cols, 0);
  const out = new Tensor(rows, cols);
  let offset = 0;
  for (const part of parts) {
    if (part.rows !== rows) throw new Error("concatCols: row mismatch");
    for (let r = 0; r < rows; r++)
      for (let c = 0; c < part.cols; c++)
        out.data[r * cols + offset + c] = part.data[r * part.cols + c];
    offset += part.cols;
  }
  if (!needsTape(...parts)) return out;
  return record(out, () => {
    let off = 0;
    for (const part of parts) {
      if (part.grad)
        for (let r = 0; r < rows; r++)
          for (let c = 0; c < part.cols; c++)
            part.grad[r * part.cols + c] += out.grad![r * cols + off + c];
      off += part.cols;
    }
  });
}

export function gatherRows(a: Tensor, indices: number[]): Tensor {
  const out = new Tensor(indices.length, a.cols);
  for (let r = 0; r < indices.length; r++)
    out.data.set(a.data.subarray(indices[r] * a.cols, (indices[r] + 1) * a.cols), r * a.cols);
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let r = 0; r < indices.length; r++) {
      const src = r * a.cols, dst = indices[r] * a.cols;
      for (let c = 0; c < a.cols; c++) a.grad[dst + c] += out.grad![src + c];
    }
  });
}

export function concatRows(parts: Tensor[]): Tensor {
  const cols = parts[0].cols;
  const rows = parts.reduce((acc, p) => acc + p.rows, 0);
  const out = new Tensor(rows, cols);
  let offset = 0;
  for (const part of parts) {
    out.data.set(part.data, offset);
    offset += part.size;
  }
  if (!needsTape(...parts)) return out;
  return record(out, () => {
    let off = 0;
    for (const part of parts) {
      if (part.grad)
        for (let i = 0; i < part.size; i++) part.grad[i] += out.grad![off + i];
      off += part.size;
    }
  });
}

/** Pack scalar tensors into one [1, n] row. */
export function concatScalars(parts: Tensor[]): Tensor {
  const out = new Tensor(1, parts.length);
  for (let i = 0; i < parts.length; i++) out.data[i] = parts[i].item();
  if (!needsTape(...parts)) return out;
  return record(out, () => {
    for (let i = 0; i < parts.length; i++)
      if (parts[i].grad) parts[i].grad![0] += out.grad![i];
  });
}

// ---------------------------------------------------------------------------
// Reductions, softmax, losses
// ---------------------------------------------------------------------------

export function sumAll(a: Tensor): Tensor {
  const out = new Tensor(1, 1);
  let acc = 0;
  for (let i = 0; i < a.size; i++) acc += a.data[i];
  out.data[0] = acc;
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    const g = out.grad![0];
    for (let i = 0; i < a.size; i++) a.grad[i] += g;
  });
}

export function meanAll(a: Tensor): Tensor {
  return scale(sumAll(a), 1 / a.size);
}

export function softmaxRows(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let r = 0; r < a.rows; r++) {
    const base = r * a.cols;
    let max = -Infinity;
    for (let c = 0; c < a.cols; c++) max = Math.max(max, a.data[base + c]);
    let z = 0;
    for (let c = 0; c < a.cols; c++) {
      const e = Math.exp(a.data[base + c] - max);
      out.data[base + c] = e;
      z += e;
    }
    for (let c = 0; c < a.cols; c++) out.data[base + c] /= z;
  }
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    for (let r = 0; r < a.rows; r++) {
      const base = r * a.cols;
      let dot = 0;
      for (let c = 0; c < a.cols; c++) dot += out.grad![base + c] * out.data[base + c];
      for (let c = 0; c < a.cols; c++)
        a.grad[base + c] += out.data[base + c] * (out.grad![base + c] - dot);
    }
  });
}

/** log(sum(exp(row))) for a [1, n] tensor, numerically stable. */
export function logSumExp(a: Tensor): Tensor {
  if (a.rows !== 1) throw new Error("logSumExp expects a row vector");
  let max = -Infinity;
  for (let i = 0; i < a.cols; i++) max = Math.max(max, a.data[i]);
  let z = 0;
  for (let i = 0; i < a.cols; i++) z += Math.exp(a.data[i] - max);
  const out = Tensor.scalar(max + Math.log(z));
  if (!needsTape(a)) return out;
  return record(out, () => {
    if (!a.grad) return;
    const g = out.grad![0];
    for (let i = 0; i < a.cols; i++)
      a.grad[i] += g * Math.exp(a.data[i] - out.data[0]);
  });
}

/** Mean cross-entropy of logit rows against integer targets. */
export function crossEntropyRows(logits: Tensor, targets: number[]): Tensor {
  if (targets.length !== logits.rows) throw new Error("crossEntropy: target count mismatch");
  const n = logits.rows, C = logits.cols;
  const probs = new Float64Array(n * C);
  let loss = 0;
  for (let r = 0; r < n; r++) {
    const base = r * C;
    let max = -Infinity;
    for (let c = 0; c < C; c++) max = Math.max(max, logits.data[base + c]);
    let z = 0;
    for (let c = 0; c < C; c++) {
      const e = Math.exp(logits.data[base + c] - max);
      probs[base + c] = e;
      z += e;
    }
    for (let c = 0; c < C; c++) probs[base + c] /= z;
    loss += Math.log(z) + max - logits.data[base + targets[r]];
  }
  const out = Tensor.scalar(loss / n);
  if (!needsTape(logits)) return out;
  return record(out, () => {
    if (!logits.grad) return;
    const g = out.grad![0] / n;
    for (let r = 0; r < n; r++) {
      const base = r * C;
      for (let c = 0; c < C; c++)
        logits.grad[base + c] += g * (probs[base + c] - (c === targets[r] ? 1 : 0));
    }
  });
}

/** Row-wise LayerNorm with learned gain/bias ([1, n] each). */
export function layerNormRows(a: Tensor, gain: Tensor, bias: Tensor, eps = 1e-5): Tensor {
  const n = a.cols;
  const out = new Tensor(a.rows, n);
  const means = new Float64Array(a.rows);
  const invStd = new Float64Array(a.rows);
  const normed = new Float64Array(a.size);
  for (let r = 0; r < a.rows; r++) {
    const base = r * n;
    let mean = 0;
    for (let c = 0; c < n; c++) mean += a.data[base + c];
    mean /= n;
    let variance = 0;
    for (let c = 0; c < n; c++) {
      const d = a.data[base + c] - mean;
      variance += d * d;
    }
    variance /= n;
    const inv = 1 / Math.sqrt(variance + eps);
    means[r] = mean;
    invStd[r] = inv;
    for (let c = 0; c < n; c++) {
      const h = (a.data[base + c] - mean) * inv;
      normed[base + c] = h;
      out.data[base + c] = h * gain.data[c] + bias.data[c];
    }
  }
  if (!needsTape(a, gain, bias)) return out;
  return record(out, () => {
    const og = out.grad!;
    for (let r = 0; r < a.rows; r++) {
      const base = r * n;
      if (gain.grad || bias.grad) {
        for (let c = 0; c < n; c++) {
          if (gain.grad) gain.grad[c] += og[base + c] * normed[base + c];
          if (bias.grad) bias.grad[c] += og[base + c];
        }
      }
      if (a.grad) {
        let sumG = 0, sumGH = 0;
        for (let c = 0; c < n; c++) {
          const gh = og[base + c] * gain.data[c];
          sumG += gh;
          sumGH += gh * normed[base + c];
        }
        for (let c = 0; c < n; c++) {
          const gh = og[base + c] * gain.data[c];
          a.grad[base + c] +=
            invStd[r] * (gh - sumG / n - (normed[base + c] * sumGH) / n);
        }
      }
    }
  });
}

/** Cosine similarity of two [1, d] rows as a scalar tensor. */
export function cosine(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "cosine");
  let dot = 0, na = 0, nb = 0;
  for (let i = 0; i < a.size; i++) {
    dot += a.data[i] * b.data[i];
    na += a.data[i] * a.data[i];
    nb += b.data[i] * b.data[i];
  }
  const denom = Math.sqrt(na) * Math.sqrt(nb) + 1e-12;
  const out = Tensor.scalar(dot / denom);
  if (!needsTape(a, b)) return out;
  return record(out, () => {
    const g = out.grad![0];
    const s = out.data[0];
    for (let i = 0; i < a.size; i++) {
      if (a.grad) a.grad[i] += g * (b.data[i] / denom - (s * a.data[i]) / (na + 1e-12));
      if (b.grad) b.grad[i] += g * (a.data[i] / denom - (s * b.data[i]) / (nb + 1e-12));
    }
  });
}
