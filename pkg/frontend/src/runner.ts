import { spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { delimiter, dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

/** One validation issue as the toolkit CLI reports it: an error code, a
 *  human message, and the identifiers of the offending record. */
export interface CliIssue {
  error: string;
  message: string;
  record?: Record<string, unknown>;
}

export class SafitCliError extends Error {
  readonly code: string;
  readonly exitCode: number;
  readonly issues: CliIssue[];

  constructor(code: string, message: string, exitCode: number, issues: CliIssue[]) {
    super(message);
    this.name = "SafitCliError";
    this.code = code;
    this.exitCode = exitCode;
    this.issues = issues;
  }
}

function repoSrcDir(): string | null {
  // when running from a checkout, ../../src holds the Python package; adding
  // it to PYTHONPATH lets the bindings work without a pip install
  const here = dirname(fileURLToPath(import.meta.url));
  const candidate = resolve(here, "..", "..", "src");
  return existsSync(join(candidate, "safit")) ? candidate : null;
}

function cliEnv(): NodeJS.ProcessEnv {
  const src = repoSrcDir();
  if (!src) return process.env;
  const existing = process.env.PYTHONPATH;
  return {
    ...process.env,
    PYTHONPATH: existing ? `${src}${delimiter}${existing}` : src,
  };
}

export function pythonExecutable(override?: string): string {
  return override ?? process.env.SAFIT_PYTHON ?? "python3";
}

function parseIssueLines(stderr: string): CliIssue[] {
  const issues: CliIssue[] = [];
  for (const line of stderr.split("\n")) {
    const t = line.trim();
    if (!t.startsWith("{")) continue;
    try {
      const obj = JSON.parse(t);
      if (typeof obj.error === "string" && typeof obj.message === "string") {
        issues.push(obj as CliIssue);
      }
    } catch {
      // partial line or free-form text; ignore
    }
  }
  return issues;
}

export function runCli(args: string[], python?: string): string {
  const res = spawnSync(pythonExecutable(python), ["-m", "safit.cli", ...args], {
    encoding: "utf8",
    env: cliEnv(),
    maxBuffer: 256 * 1024 * 1024,
  });
  if (res.error) throw res.error;
  if (res.status !== 0) {
    const issues = parseIssueLines(res.stderr ?? "");
    if (issues.length > 0) {
      const head = issues[0];
      const extra = issues.length > 1 ? ` (+${issues.length - 1} more issue(s))` : "";
      throw new SafitCliError(head.error, `${head.error}: ${head.message}${extra}`, res.status ?? 1, issues);
    }
    const text = (res.stderr ?? "").trim().split("\n").slice(-1)[0] ?? "command failed";
    throw new SafitCliError(res.status === 2 ? "config" : "error", text, res.status ?? 1, []);
  }
  return res.stdout;
}

/** Run fn with a private scratch directory, always cleaning it up. */
export function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "safit-bindings-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
