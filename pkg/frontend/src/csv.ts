import Papa from "papaparse";

/**
 * Readers for the two CSV shapes the run harness emits.
 *
 * Field text is kept verbatim alongside the parsed numbers: the sidecar
 * dump must echo the file's own digits, never a reformatted copy.
 */

export const RUN_COLUMNS = [
  "run_id", "env", "algo", "seed", "t", "samples", "sup_error", "theta_norm", "diverged",
] as const;

export const SWEEP_COLUMNS = ["epsilon", "samples", "achieved_error"] as const;

export class SchemaError extends Error {}

export interface RunRow {
  runId: number;
  env: string;
  algo: string;
  seed: number;
  t: number;
  samples: number;
  supError: number;
  thetaNorm: number;
  diverged: boolean;
  raw: Record<string, string>;
}

export interface SweepPoint {
  epsilon: number;
  samples: number;
  achievedError: number;
  attained: boolean;
  raw: Record<string, string>;
}

export interface SweepData {
  points: SweepPoint[];
  /** slope of the attained points in log-log space, as printed in the file footer */
  slopeText: string | null;
}

function checkHeader(fields: string[] | undefined, expected: readonly string[]): void {
  const seen = fields ?? [];
  const missing = expected.filter((c) => !seen.includes(c));
  const unexpected = seen.filter((c) => !(expected as readonly string[]).includes(c));
  if (missing.length === 0 && unexpected.length === 0) return;
  const parts: string[] = [];
  if (missing.length) parts.push(`missing column(s): ${missing.join(", ")}`);
  if (unexpected.length) parts.push(`unexpected column(s): ${unexpected.join(", ")}`);
  throw new SchemaError(`csv schema mismatch: ${parts.join("; ")}`);
}

function parseTable(text: string, expected: readonly string[]): Record<string, string>[] {
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    comments: "#",
    skipEmptyLines: true,
  });
  checkHeader(parsed.meta.fields, expected);
  return parsed.data;
}

export function parseRunCsv(text: string): RunRow[] {
  return parseTable(text, RUN_COLUMNS).map((raw) => ({
    runId: Number(raw.run_id),
    env: raw.env,
    algo: raw.algo,
    seed: Number(raw.seed),
    t: Number(raw.t),
    samples: Number(raw.samples),
    supError: Number(raw.sup_error),
    thetaNorm: Number(raw.theta_norm),
    diverged: raw.diverged === "1",
    raw,
  }));
}

export function parseSweepCsv(text: string): SweepData {
  const points = parseTable(text, SWEEP_COLUMNS).map((raw) => {
    const samples = Number(raw.samples);
    return {
      epsilon: Number(raw.epsilon),
      samples,
      achievedError: Number(raw.achieved_error),
      attained: samples >= 0,
      raw,
    };
  });
  const footer = /^#\s*loglog_slope=(\S+)\s*$/m.exec(text);
  return { points, slopeText: footer ? footer[1] : null };
}
