/** Axis wiring for each figure the run harness knows how to produce. */

export type RunField = "t" | "samples";
export type ValueField = "sup_error" | "theta_norm";

export interface Preset {
  name: string;
  kind: "runs" | "sweep";
  x: RunField;
  y: ValueField;
  logX: boolean;
  logY: boolean;
  title: string;
  xLabel: string;
  yLabel: string;
}

const AXIS_LABEL: Record<string, string> = {
  t: "update round",
  samples: "samples",
  sup_error: "sup error",
  theta_norm: "parameter norm",
};

function runs(name: string, x: RunField, y: ValueField, logY: boolean, title: string): Preset {
  return {
    name, kind: "runs", x, y,
    logX: false, logY,
    title,
    xLabel: AXIS_LABEL[x],
    yLabel: AXIS_LABEL[y],
  };
}

export const PRESETS: Record<string, Preset> = {
  fig1: runs("fig1", "samples", "theta_norm", true, "star MDP, classical update"),
  fig2: runs("fig2", "t", "theta_norm", true, "star MDP, frozen-target update"),
  fig3: runs("fig3", "samples", "theta_norm", true, "two-state MDP, classical update"),
  fig4: runs("fig4", "t", "theta_norm", true, "two-state MDP, frozen-target update"),
  fig5: runs("fig5", "t", "sup_error", true, "star MDP, frozen target with truncation"),
  fig6: runs("fig6", "t", "theta_norm", false, "two-state MDP, truncated update settles"),
  sweep: {
    name: "sweep",
    kind: "sweep",
    x: "samples",
    y: "sup_error",
    logX: true,
    logY: true,
    title: "samples needed per target accuracy",
    xLabel: "target accuracy",
    yLabel: "samples",
  },
};

export function presetNames(): string[] {
  return Object.keys(PRESETS);
}
