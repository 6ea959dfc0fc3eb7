export { parseRunCsv, parseSweepCsv, SchemaError, RUN_COLUMNS, SWEEP_COLUMNS } from "./csv.js";
export type { RunRow, SweepPoint, SweepData } from "./csv.js";
export { PRESETS, presetNames } from "./presets.js";
export type { Preset } from "./presets.js";
export { renderRuns, renderSweep, seriesFromRows } from "./render.js";
export type { RenderResult } from "./render.js";
export { main } from "./cli.js";
