/** Self-describing JSON tensor checkpoint. */

import * as fs from "node:fs";

import { Tensor } from "./tensor.js";

export interface CheckpointMeta {
  [key: string]: unknown;
}

export function saveCheckpoint(
  path: string,
  tensors: Map<string, Tensor>,
  meta: CheckpointMeta,
): void {
  const payload = {
    format: "tensor-json/1",
    meta,
    tensors: Object.fromEntries(
      [...tensors.entries()].map(([name, t]) => [
        name,
        { shape: [t.rows, t.cols], data: Array.from(t.data) },
      ]),
    ),
  };
  fs.writeFileSync(path, JSON.stringify(payload));
}

export function loadCheckpoint(path: string): {
  meta: CheckpointMeta;
  tensors: Map<string, Tensor>;
} {
  const payload = JSON.parse(fs.readFileSync(path, "utf-8"));
  if (payload.format !== "tensor-json/1")
    throw new Error(`unsupported checkpoint format ${payload.format}`);
  const tensors = new Map<string, Tensor>();
  for (const [name, spec] of Object.entries<any>(payload.tensors)) {
    const [rows, cols] = spec.shape;
    const t = new Tensor(rows, cols, Float64Array.from(spec.data));
    tensors.set(name, t);
  }
  return { meta: payload.meta, tensors };
}
