import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";

import { parseRunCsv, parseSweepCsv, SchemaError } from "./csv.js";
import { PRESETS, presetNames } from "./presets.js";
import { renderRuns, renderSweep } from "./render.js";

interface Args {
  preset: string;
  in: string;
  out: string;
  aggregate: boolean;
}

/** Runs the plot command. Returns the process exit code instead of exiting. */
export function main(argv: string[]): number {
  let args: Args;
  try {
    args = yargs(argv)
      .usage("plot --preset figN --in runs.csv --out figN.svg [--aggregate]")
      .option("preset", { type: "string", demandOption: true, describe: "figure preset, one of " + presetNames().join(", ") })
      .option("in", { type: "string", demandOption: true, describe: "input CSV produced by the run harness" })
      .option("out", { type: "string", demandOption: true, describe: "output image path" })
      .option("aggregate", { type: "boolean", default: false, describe: "mean curve with a min..max band across seeds" })
      .strict()
      .exitProcess(false)
      .parseSync() as unknown as Args;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }

  const preset = PRESETS[args.preset];
  if (!preset) {
    console.error(`unknown preset ${JSON.stringify(args.preset)}; have ${presetNames().join(", ")}`);
    return 2;
  }

  let text: string;
  try {
    text = readFileSync(args.in, "utf8");
  } catch (err) {
    console.error(`cannot read ${args.in}: ${err instanceof Error ? err.message : err}`);
    return 2;
  }

  let result;
  try {
    result = preset.kind === "sweep"
      ? renderSweep(parseSweepCsv(text), preset)
      : renderRuns(parseRunCsv(text), preset, args.aggregate);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`${args.in}: ${err.message}`);
      return 2;
    }
    throw err;
  }

  if (args.out.endsWith(".png")) {
    console.error(`note: output is an SVG document despite the ${JSON.stringify(".png")} extension`);
  }
  const sidecarPath = args.out + ".series.txt";
  writeFileSync(args.out, result.svg);
  writeFileSync(sidecarPath, result.sidecar);
  console.log(`wrote ${args.out} and ${sidecarPath}`);
  return 0;
}
