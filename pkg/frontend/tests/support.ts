import { spawnSync } from "node:child_process";
import { delimiter, dirname, resolve } from "node:path";
import { fileURLToPath } from "node:url";

import type { BoxRow, Measure } from "../dist/index.js";

export const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");

function pyEnv(): NodeJS.ProcessEnv {
  const src = resolve(REPO_ROOT, "src");
  const existing = process.env.PYTHONPATH;
  return { ...process.env, PYTHONPATH: existing ? `${src}${delimiter}${existing}` : src };
}

/** Run a Python snippet against the primary package, JSON in on stdin,
 *  JSON out on stdout. This is the reference side of every parity test:
 *  it calls the toolkit's API directly, bypassing the bindings entirely. */
export function primary(code: string, payload: unknown): any {
  const res = spawnSync(process.env.SAFIT_PYTHON ?? "python3", ["-c", code], {
    input: JSON.stringify(payload),
    encoding: "utf8",
    env: pyEnv(),
    maxBuffer: 256 * 1024 * 1024,
  });
  if (res.error) throw res.error;
  if (res.status !== 0) throw new Error(`reference script failed: ${res.stderr}`);
  return JSON.parse(res.stdout);
}

export function primaryPairwise(measure: Measure, a: BoxRow[], b: BoxRow[], c = 32.0, k: number | null = null): number[][] {
  return primary(
    `
import json, sys
from safit import BBox, resolve
from safit.metrics import pairwise
req = json.load(sys.stdin)
fn = resolve(req["measure"], req["c"], req["k"])
print(json.dumps(pairwise(fn, [BBox(*r) for r in req["a"]], [BBox(*r) for r in req["b"]])))
`,
    { measure, a, b, c, k },
  );
}

/** Micro-fixture pair (ground truth object, prediction list) from the
 *  primary's own generator, so both components are tested on one corpus. */
export function microFixture(seed: string, nClasses = 2): { gt: unknown; preds: unknown } {
  return primary(
    `
import json, random, sys
sys.path.insert(0, ${JSON.stringify(REPO_ROOT)})
from tests.helpers import random_micro_fixture
req = json.load(sys.stdin)
gt, preds = random_micro_fixture(random.Random(req["seed"]), n_classes=req["n_classes"])
print(json.dumps({"gt": gt, "preds": preds}))
`,
    { seed, n_classes: nClasses },
  );
}

/** Raw CLI invocation, for reference runs with hand-built argv. */
export function rawCli(args: string[]): { status: number | null; stdout: string; stderr: string } {
  const res = spawnSync(process.env.SAFIT_PYTHON ?? "python3", ["-m", "safit.cli", ...args], {
    encoding: "utf8",
    env: pyEnv(),
    maxBuffer: 256 * 1024 * 1024,
  });
  if (res.error) throw res.error;
  return { status: res.status, stdout: res.stdout, stderr: res.stderr };
}

/** Deterministic float generator (mulberry32) so failures replay. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Random box with dirty (non-representable-decimal) coordinates spanning
 *  tiny through large scales; exercises the full serialization surface. */
export function randomBox(r: () => number): BoxRow {
  const mag = Math.pow(10, r() * 3 - 1.5);
  return [(r() - 0.5) * 200, (r() - 0.5) * 200, (0.5 + r() * 40) * mag, (0.5 + r() * 40) * mag];
}
