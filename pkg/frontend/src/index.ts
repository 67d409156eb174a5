/**
 * Bindings for the safit toolkit. Every call shells out to the Python CLI
 * and exchanges values as JSON, so results are bit-for-bit identical to the
 * toolkit's own float64 output: both runtimes serialize doubles as
 * shortest round-trip decimals and parse them back to the same bits.
 *
 * Calls are stateless, synchronous subprocess round-trips. Nothing numeric
 * is reimplemented on this side.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { runCli, withTempDir, SafitCliError } from "./runner.js";
import type { CliIssue } from "./runner.js";

export { SafitCliError };
export type { CliIssue };

export type Measure =
  | "iou"
  | "giou"
  | "diou"
  | "ciou"
  | "nwd"
  | "safit"
  | "safit_s"
  | "safit_g";

export const MEASURES: readonly Measure[] = [
  "iou",
  "giou",
  "diou",
  "ciou",
  "nwd",
  "safit",
  "safit_s",
  "safit_g",
];

/** Box in center form. */
export type BoxRow = [cx: number, cy: number, w: number, h: number];

/** N boxes with optional parallel score/class columns (for detections). */
export interface BatchBoxes {
  boxes: BoxRow[];
  scores?: number[];
  classes?: number[];
}

export type Boxes = BoxRow[] | BatchBoxes;

export interface MeasureParams {
  /** scale balance constant for the adaptive measures (default 32) */
  c?: number;
  /** normalization constant for plain nwd (default: same as c) */
  k?: number;
  /** python executable override (default $SAFIT_PYTHON or "python3") */
  python?: string;
}

function rows(input: Boxes, label: string): BoxRow[] {
  const batch = Array.isArray(input) ? null : input;
  const list = Array.isArray(input) ? input : input.boxes;
  if (!Array.isArray(list)) {
    throw new TypeError(`${label}: expected an array of [cx, cy, w, h] rows`);
  }
  list.forEach((row, i) => {
    if (!Array.isArray(row) || row.length !== 4) {
      throw new TypeError(`${label}[${i}]: expected [cx, cy, w, h], got ${JSON.stringify(row)}`);
    }
    row.forEach((v, j) => {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new TypeError(`${label}[${i}][${j}]: expected a finite number, got ${String(v)}`);
      }
    });
    if (row[2] <= 0 || row[3] <= 0) {
      throw new RangeError(`${label}[${i}]: w and h must be > 0, got w=${row[2]}, h=${row[3]}`);
    }
  });
  for (const col of ["scores", "classes"] as const) {
    const values = batch?.[col];
    if (values !== undefined && values.length !== list.length) {
      throw new TypeError(`${label}.${col}: length ${values.length} does not match ${list.length} boxes`);
    }
  }
  return list;
}

function measureArgs(measure: Measure, params?: MeasureParams): string[] {
  const args = ["--measure", measure];
  if (params?.c !== undefined) args.push(`--c=${params.c}`);
  if (params?.k !== undefined) args.push(`--k=${params.k}`);
  return args;
}

/**
 * Dense affinity table: entry (i, j) is measure(a[i], b[j]). Empty inputs
 * give the corresponding empty matrix.
 */
export function pairwise(measure: Measure, boxesA: Boxes, boxesB: Boxes, params?: MeasureParams): number[][] {
  const a = rows(boxesA, "boxesA");
  const b = rows(boxesB, "boxesB");
  return withTempDir((dir) => {
    const pa = join(dir, "a.json");
    const pb = join(dir, "b.json");
    writeFileSync(pa, JSON.stringify(a));
    writeFileSync(pb, JSON.stringify(b));
    const out = runCli(
      ["pairwise", ...measureArgs(measure, params), "--boxes-a", pa, "--boxes-b", pb],
      params?.python,
    );
    return JSON.parse(out).values as number[][];
  });
}

export interface LossResult {
  /** 1 - measure(pred, gt) */
  loss: number;
  /** d loss / d (cx, cy, w, h) of the prediction */
  gradient: [number, number, number, number];
  /** true at kinks (edge ties, the hard-switch boundary) */
  nondifferentiable: boolean;
  /** central-difference relative error, when fdCheck was requested and the
   *  point is smooth; null otherwise */
  fdError: number | null;
}

export interface LossOptions extends MeasureParams {
  fdCheck?: boolean;
  /** central difference step (default 1e-6) */
  step?: number;
}

export function loss(measure: Measure, pred: BoxRow, gt: BoxRow, options?: LossOptions): LossResult {
  const [p] = rows([pred], "pred");
  const [g] = rows([gt], "gt");
  const args = ["loss", ...measureArgs(measure, options), `--pred=${p.join(",")}`, `--gt=${g.join(",")}`];
  if (options?.fdCheck) args.push("--fd-check");
  if (options?.step !== undefined) args.push(`--step=${options.step}`);
  const obj = JSON.parse(runCli(args, options?.python));
  return {
    loss: obj.loss,
    gradient: obj.gradient,
    nondifferentiable: obj.nondifferentiable,
    fdError: obj.fd_error,
  };
}

export interface EvaluateConfig {
  measure?: Measure;
  c?: number;
  k?: number;
  /** number list, or a "start:step:stop" string */
  thresholds?: number[] | string;
  maxDetections?: number;
  recallPoints?: number;
  modality?: "visible" | "thermal";
  lightVision?: string;
  perLightVision?: boolean;
  /** "name:lo:hi,..." with "inf" allowed as the last hi */
  scaleBins?: string;
  workers?: number;
  python?: string;
}

/** The evaluation report exactly as the toolkit writes it to JSON. */
export interface EvalReport {
  schema_version: string;
  measure: string;
  params: Record<string, number>;
  thresholds: number[];
  max_detections: number;
  recall_points: number;
  filters: Record<string, unknown>;
  counts: Record<string, number>;
  defined: boolean;
  overall: Record<string, number | null>;
  per_class: Record<string, Record<string, number | null>>;
  per_light_vision: Record<string, Record<string, number | null>> | null;
}

/**
 * Score a prediction file against a ground-truth file. The returned object
 * mirrors the CLI's JSON report field for field.
 */
export function evaluateFiles(gtPath: string, predPath: string, config?: EvaluateConfig): EvalReport {
  const args = ["evaluate", "--gt", gtPath, "--pred", predPath];
  if (config?.measure !== undefined) args.push("--measure", config.measure);
  if (config?.c !== undefined) args.push(`--c=${config.c}`);
  if (config?.k !== undefined) args.push(`--k=${config.k}`);
  if (config?.thresholds !== undefined) {
    const t = typeof config.thresholds === "string" ? config.thresholds : config.thresholds.join(",");
    args.push("--thresholds", t);
  }
  if (config?.maxDetections !== undefined) args.push(`--max-detections=${config.maxDetections}`);
  if (config?.recallPoints !== undefined) args.push(`--recall-points=${config.recallPoints}`);
  if (config?.modality !== undefined) args.push("--modality", config.modality);
  if (config?.lightVision !== undefined) args.push("--light-vision", config.lightVision);
  if (config?.perLightVision) args.push("--per-light-vision");
  if (config?.scaleBins !== undefined) args.push("--scale-bins", config.scaleBins);
  if (config?.workers !== undefined) args.push(`--workers=${config.workers}`);
  return withTempDir((dir) => {
    const out = join(dir, "report.json");
    runCli([...args, "--out", out], config?.python);
    return JSON.parse(readFileSync(out, "utf8")) as EvalReport;
  });
}

/**
 * Measure decay as a square gt of the given side length is missed
 * diagonally by d = 0..maxDev pixels. Returns [d, value] pairs.
 */
export function deviationCurve(
  size: number,
  maxDev: number,
  measure: Measure,
  params?: MeasureParams,
): Array<[number, number]> {
  if (typeof size !== "number" || !Number.isFinite(size) || size <= 0) {
    throw new RangeError(`size must be a finite number > 0, got ${String(size)}`);
  }
  if (!Number.isInteger(maxDev) || maxDev < 0) {
    throw new RangeError(`maxDev must be an integer >= 0, got ${String(maxDev)}`);
  }
  return withTempDir((dir) => {
    const out = join(dir, "curves.json");
    runCli(
      ["curves", ...measureArgs(measure, params), "--sizes", String(size), `--max-dev=${maxDev}`, "--out", out],
      params?.python,
    );
    const obj = JSON.parse(readFileSync(out, "utf8"));
    const values = obj.curves[0].values as number[];
    return values.map((v, d) => [d, v] as [number, number]);
  });
}

// snake_case aliases matching the toolkit's own operation names
export const evaluate_files = evaluateFiles;
export const deviation_curve = deviationCurve;
