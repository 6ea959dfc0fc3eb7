import type { RunRow, SweepData } from "./csv.js";
import type { Preset } from "./presets.js";

/**
 * Deterministic SVG rendering. No timestamps, no randomness, fixed styles;
 * the same input bytes always produce the same output bytes.
 */

export interface RenderResult {
  svg: string;
  sidecar: string;
}

interface Series {
  runId: number;
  seed: number;
  label: string;
  xs: number[];
  ys: number[];
  xRaw: string[];
  yRaw: string[];
  diverged: boolean;
}

const W = 720;
const H = 480;
const MARGIN = { top: 42, right: 24, bottom: 52, left: 76 };
const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

function px(v: number): string {
  return v.toFixed(2);
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-4) return v.toExponential().replace("e+", "e");
  return String(Number(v.toPrecision(10)));
}

function linearTicks(lo: number, hi: number): number[] {
  const span = hi - lo;
  if (!(span > 0)) return [lo];
  const rough = span / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (span / (mag * m) <= 6) { step = mag * m; break; }
  }
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  const k0 = Math.floor(Math.log10(lo));
  const k1 = Math.ceil(Math.log10(hi));
  for (let k = k0; k <= k1; k++) {
    for (const m of [1, 2, 5]) {
      const v = m * Math.pow(10, k);
      if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push(v);
    }
  }
  // decades alone when they give enough structure, otherwise keep 1-2-5
  const decades = out.filter((v) => {
    const l = Math.log10(v);
    return Math.abs(l - Math.round(l)) < 1e-9;
  });
  let ticks = decades.length >= 2 ? decades : out;
  while (ticks.length > 8) ticks = ticks.filter((_, i) => i % 2 === 0);
  return ticks;
}

interface Scale {
  toPx(v: number): number;
  ticks: number[];
}

function makeScale(lo: number, hi: number, log: boolean, pxLo: number, pxHi: number): Scale {
  if (log) {
    const a = Math.log10(lo);
    const b = Math.log10(hi);
    return {
      toPx: (v) => pxLo + ((Math.log10(v) - a) / (b - a)) * (pxHi - pxLo),
      ticks: logTicks(lo, hi),
    };
  }
  return {
    toPx: (v) => pxLo + ((v - lo) / (hi - lo)) * (pxHi - pxLo),
    ticks: linearTicks(lo, hi),
  };
}

function domain(values: number[], log: boolean): [number, number] {
  if (values.length === 0) return log ? [1, 10] : [0, 1];
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (log) {
    if (lo === hi) { lo /= 10; hi *= 10; }
    const pad = Math.pow(10, 0.04 * Math.log10(hi / lo));
    return [lo / pad, hi * pad];
  }
  if (lo === hi) { lo -= 1; hi += 1; }
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

export function seriesFromRows(rows: RunRow[], preset: Preset): Series[] {
  const groups = new Map<number, RunRow[]>();
  for (const row of rows) {
    const g = groups.get(row.runId);
    if (g) g.push(row);
    else groups.set(row.runId, [row]);
  }
  const ordered = [...groups.values()].sort(
    (a, b) => a[0].seed - b[0].seed || a[0].runId - b[0].runId,
  );
  return ordered.map((g) => {
    const s: Series = {
      runId: g[0].runId,
      seed: g[0].seed,
      label: `seed ${g[0].seed}`,
      xs: [], ys: [], xRaw: [], yRaw: [],
      diverged: g[g.length - 1].diverged,
    };
    for (const row of g) {
      const x = row[preset.x === "t" ? "t" : "samples"];
      const y = preset.y === "sup_error" ? row.supError : row.thetaNorm;
      // a log axis has no place for zero, negative, or overflowed values,
      // so a diverging run simply stops at its last representable point
      if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
      if (preset.logX && x <= 0) continue;
      if (preset.logY && y <= 0) continue;
      s.xs.push(x);
      s.ys.push(y);
      s.xRaw.push(row.raw[preset.x]);
      s.yRaw.push(row.raw[preset.y]);
    }
    return s;
  });
}

function aggregateSeries(series: Series[]): { xs: number[]; mean: number[]; min: number[]; max: number[] } {
  const byX = new Map<number, number[]>();
  for (const s of series) {
    for (let i = 0; i < s.xs.length; i++) {
      const list = byX.get(s.xs[i]);
      if (list) list.push(s.ys[i]);
      else byX.set(s.xs[i], [s.ys[i]]);
    }
  }
  const xs = [...byX.keys()].sort((a, b) => a - b);
  const mean: number[] = [];
  const min: number[] = [];
  const max: number[] = [];
  for (const x of xs) {
    const ys = byX.get(x)!;
    mean.push(ys.reduce((a, b) => a + b, 0) / ys.length);
    min.push(Math.min(...ys));
    max.push(Math.max(...ys));
  }
  return { xs, mean, min, max };
}

function openSvg(parts: string[], title: string): void {
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" width="${W}" height="${H}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${W}" height="${H}" fill="#ffffff"/>`);
  parts.push(`<text x="${W / 2}" y="24" text-anchor="middle" font-size="15" fill="#222">${title}</text>`);
}

function drawAxes(parts: string[], xs: Scale, ys: Scale, xLabel: string, yLabel: string): void {
  const x0 = MARGIN.left;
  const x1 = W - MARGIN.right;
  const y0 = H - MARGIN.bottom;
  const y1 = MARGIN.top;
  for (const t of xs.ticks) {
    const x = px(xs.toPx(t));
    parts.push(`<line x1="${x}" y1="${y0}" x2="${x}" y2="${y1}" stroke="#e6e6e6"/>`);
    parts.push(`<text x="${x}" y="${y0 + 18}" text-anchor="middle" font-size="11" fill="#444">${fmtTick(t)}</text>`);
  }
  for (const t of ys.ticks) {
    const y = px(ys.toPx(t));
    parts.push(`<line x1="${x0}" y1="${y}" x2="${x1}" y2="${y}" stroke="#e6e6e6"/>`);
    parts.push(`<text x="${x0 - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" font-size="11" fill="#444">${fmtTick(t)}</text>`);
  }
  parts.push(`<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#444"/>`);
  parts.push(`<text x="${(x0 + x1) / 2}" y="${H - 12}" text-anchor="middle" font-size="12" fill="#222">${xLabel}</text>`);
  parts.push(`<text x="20" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" fill="#222" transform="rotate(-90 20 ${(y0 + y1) / 2})">${yLabel}</text>`);
}

function polyline(s: Series, xs: Scale, ys: Scale, color: string): string {
  const pts: string[] = [];
  for (let i = 0; i < s.xs.length; i++) {
    pts.push(`${px(xs.toPx(s.xs[i]))},${px(ys.toPx(s.ys[i]))}`);
  }
  return `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" stroke-width="1.5"/>`;
}

export function renderRuns(rows: RunRow[], preset: Preset, aggregate: boolean): RenderResult {
  const series = seriesFromRows(rows, preset).filter((s) => s.xs.length > 0);
  const allX = series.flatMap((s) => s.xs);
  const allY = series.flatMap((s) => s.ys);
  const [xLo, xHi] = domain(allX, preset.logX);
  const [yLo, yHi] = domain(allY, preset.logY);
  const xs = makeScale(xLo, xHi, preset.logX, MARGIN.left, W - MARGIN.right);
  const ys = makeScale(yLo, yHi, preset.logY, H - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  openSvg(parts, preset.title);
  drawAxes(parts, xs, ys, preset.xLabel, preset.yLabel);

  const side: string[] = [`preset ${preset.name}${aggregate ? " aggregate" : ""}`, `x ${preset.x}`, `y ${preset.y}`];

  if (aggregate && series.length > 0) {
    const agg = aggregateSeries(series);
    const upper = agg.xs.map((x, i) => `${px(xs.toPx(x))},${px(ys.toPx(agg.max[i]))}`);
    const lower = agg.xs.map((x, i) => `${px(xs.toPx(x))},${px(ys.toPx(agg.min[i]))}`).reverse();
    parts.push(`<path d="M ${upper.join(" L ")} L ${lower.join(" L ")} Z" fill="${PALETTE[0]}" fill-opacity="0.18" stroke="none"/>`);
    const meanSeries: Series = {
      runId: -1, seed: -1, label: "mean", xs: agg.xs, ys: agg.mean,
      xRaw: [], yRaw: [], diverged: false,
    };
    parts.push(polyline(meanSeries, xs, ys, PALETTE[0]));
    side.push("curve mean");
    agg.xs.forEach((x, i) => side.push(`${String(x)},${String(agg.mean[i])}`));
    side.push("band min");
    agg.xs.forEach((x, i) => side.push(`${String(x)},${String(agg.min[i])}`));
    side.push("band max");
    agg.xs.forEach((x, i) => side.push(`${String(x)},${String(agg.max[i])}`));
  } else {
    series.forEach((s, i) => {
      const color = PALETTE[i % PALETTE.length];
      parts.push(polyline(s, xs, ys, color));
      if (s.diverged) {
        const last = s.xs.length - 1;
        parts.push(
          `<circle cx="${px(xs.toPx(s.xs[last]))}" cy="${px(ys.toPx(s.ys[last]))}" r="3.5" fill="#ffffff" stroke="${color}" stroke-width="1.5"/>`,
        );
      }
      // one block per curve; data lines echo the file's own digits
      side.push(`curve run=${s.runId} seed=${s.seed}${s.diverged ? " diverged" : ""}`);
      for (let j = 0; j < s.xs.length; j++) {
        side.push(`${s.xRaw[j]},${s.yRaw[j]}`);
      }
    });
    if (series.length > 0 && series.length <= 10) {
      const lx = W - MARGIN.right - 118;
      series.forEach((s, i) => {
        const ly = MARGIN.top + 14 + i * 16;
        parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 20}" y2="${ly}" stroke="${PALETTE[i % PALETTE.length]}" stroke-width="2"/>`);
        parts.push(`<text x="${lx + 26}" y="${ly}" dominant-baseline="middle" font-size="11" fill="#222">${s.label}</text>`);
      });
    }
  }

  parts.push("</svg>");
  return { svg: parts.join("\n") + "\n", sidecar: side.join("\n") + "\n" };
}

export function renderSweep(data: SweepData, preset: Preset): RenderResult {
  const attained = data.points
    .filter((p) => p.attained)
    .sort((a, b) => a.epsilon - b.epsilon);
  const [xLo, xHi] = domain(attained.map((p) => p.epsilon), true);
  const [yLo, yHi] = domain(attained.map((p) => p.samples), true);
  const xs = makeScale(xLo, xHi, true, MARGIN.left, W - MARGIN.right);
  const ys = makeScale(yLo, yHi, true, H - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  openSvg(parts, preset.title);
  drawAxes(parts, xs, ys, preset.xLabel, preset.yLabel);

  if (attained.length > 0) {
    const pts = attained.map((p) => `${px(xs.toPx(p.epsilon))},${px(ys.toPx(p.samples))}`);
    parts.push(`<polyline points="${pts.join(" ")}" fill="none" stroke="${PALETTE[0]}" stroke-width="1.5"/>`);
    for (const p of attained) {
      parts.push(`<circle cx="${px(xs.toPx(p.epsilon))}" cy="${px(ys.toPx(p.samples))}" r="3" fill="${PALETTE[0]}"/>`);
    }
  }
  if (data.slopeText !== null) {
    parts.push(`<text x="${MARGIN.left + 10}" y="${MARGIN.top + 18}" font-size="12" fill="#222">log-log slope ${data.slopeText}</text>`);
  }
  parts.push("</svg>");

  const side: string[] = [`preset ${preset.name}`, "x epsilon", "y samples", "curve attained"];
  for (const p of attained) side.push(`${p.raw.epsilon},${p.raw.samples}`);
  for (const p of data.points) {
    if (!p.attained) side.push(`unattained ${p.raw.epsilon}`);
  }
  if (data.slopeText !== null) side.push(`slope ${data.slopeText}`);
  return { svg: parts.join("\n") + "\n", sidecar: side.join("\n") + "\n" };
}
