import { writeFileSync } from "fs";
import { extname } from "path";
import { UnknownKind } from "./errors.js";
import { Table, readTable } from "./table.js";
import { ChartOptions } from "./charts/frame.js";
import { r2Spec } from "./charts/r2_spec.js";
import { pvalShare } from "./charts/pval_share.js";
import { coefCi } from "./charts/coef_ci.js";
import { specCurve } from "./charts/spec_curve.js";
import { metricDensity } from "./charts/metric_density.js";

export const CHART_KINDS = ["r2_spec", "pval_share", "coef_ci", "spec_curve", "metric_density"] as const;
export type ChartKind = (typeof CHART_KINDS)[number];

export interface ChartRequest {
  kind: ChartKind;
  input: string;
  output: string;
  groupBy?: string[];
  title?: string;
  xLabel?: string;
  yLabel?: string;
  width?: number;
  height?: number;
}

const BUILDERS: Record<ChartKind, (table: Table, opts: ChartOptions) => string> = {
  r2_spec: r2Spec,
  pval_share: pvalShare,
  coef_ci: coefCi,
  spec_curve: specCurve,
  metric_density: metricDensity,
};

const DEFAULT_GROUP_BY: Record<ChartKind, string[]> = {
  r2_spec: ["scheme", "spec"],
  pval_share: ["scheme"],
  coef_ci: ["scheme"],
  spec_curve: [],
  metric_density: ["metric_id"],
};

export function chartSvg(req: ChartRequest): string {
  const build = BUILDERS[req.kind];
  if (build === undefined) throw new UnknownKind(req.kind, CHART_KINDS);
  const table = readTable(req.input);
  const opts: ChartOptions = {
    width: req.width ?? 760,
    height: req.height ?? 480,
    groupBy: req.groupBy ?? DEFAULT_GROUP_BY[req.kind],
    title: req.title,
    xLabel: req.xLabel,
    yLabel: req.yLabel,
  };
  return build(table, opts);
}

/** Render to req.output; .svg writes markup, .png rasterizes it. */
export async function render(req: ChartRequest): Promise<string> {
  const svg = chartSvg(req);
  const ext = extname(req.output).toLowerCase();
  if (ext === ".png") {
    const { Resvg } = await import("@resvg/resvg-js");
    const png = new Resvg(svg).render().asPng();
    writeFileSync(req.output, png);
  } else {
    writeFileSync(req.output, svg, "utf8");
  }
  return req.output;
}
