import tQuantile from "@stdlib/stats-base-dists-t-quantile";
import { EmptyInput, MissingColumn } from "../errors.js";
import { Table, groupLabel, groupsInOrder, numeric, requireColumns } from "../table.js";
import { el, fmt, svgDocument, textEl } from "../svg.js";
import { extent, niceTicks } from "../scale.js";
import {
  ChartOptions, color, frameFor, legend, titleBlock, xAxis, xScaleFromTicks, zeroLine,
} from "./frame.js";

interface Coef {
  beta: number;
  lower: number;
  upper: number;
  label: string;
  group: string;
}

export const CONFIDENCE = 0.95;

/** 95% t interval on g-1 degrees of freedom, the battery's cluster convention. */
export function tInterval(beta: number, se: number, g: number): [number, number] {
  const crit = tQuantile(0.5 + CONFIDENCE / 2, g - 1);
  return [beta - crit * se, beta + crit * se];
}

/**
 * Coefficient panel: one dot-and-whisker per row, top to bottom in CSV
 * order. Accepts precomputed lower/upper columns, or beta1/se1/g from
 * which a 95% t interval on g-1 degrees of freedom is built (the battery's
 * cluster count convention). Errored battery rows have blank numbers and
 * are skipped.
 */
export function coefCi(table: Table, opts: ChartOptions): string {
  requireColumns(table, ["beta1", ...opts.groupBy], "coef_ci");
  const precomputed = table.columns.includes("lower") && table.columns.includes("upper");
  if (!precomputed && !(table.columns.includes("se1") && table.columns.includes("g"))) {
    throw new MissingColumn("coef_ci", ["lower+upper or se1+g"], table.columns);
  }

  const rows: Coef[] = [];
  for (const row of table.rows) {
    const beta = numeric(row, "beta1");
    if (beta === null) continue;
    let lower: number | null;
    let upper: number | null;
    if (precomputed) {
      lower = numeric(row, "lower");
      upper = numeric(row, "upper");
    } else {
      const se = numeric(row, "se1");
      const g = numeric(row, "g");
      if (se === null || g === null || g < 2) continue;
      [lower, upper] = tInterval(beta, se, g);
    }
    if (lower === null || upper === null) continue;
    rows.push({
      beta,
      lower,
      upper,
      label: groupLabel(row, opts.groupBy),
      group: opts.groupBy.length > 0 ? (row[opts.groupBy[0]] ?? "") : "",
    });
  }
  if (rows.length === 0) throw new EmptyInput("coef_ci needs estimable rows (blank beta1 rows are skipped)");

  const groups = opts.groupBy.length > 0 ? groupsInOrder(table.rows, [opts.groupBy[0]]) : [];
  const labelWidth = Math.min(180, 10 + 6 * Math.max(...rows.map((r) => r.label.length)));
  const f = frameFor(opts, groups.length, labelWidth);
  const ticks = niceTicks(...extent(rows.flatMap((r) => [r.lower, r.upper])));
  const x = xScaleFromTicks(f, ticks);
  const band = f.plotHeight / rows.length;

  const body: string[] = [...titleBlock(opts)];
  body.push(...xAxis(f, x, ticks, opts.xLabel ?? "estimate with 95% CI"));
  body.push(el("line", { x1: f.left, y1: f.top, x2: f.left, y2: f.bottom, stroke: "#333", "stroke-width": 1 }));
  body.push(...zeroLine(f, x, "x"));

  rows.forEach((r, i) => {
    const cy = f.top + (i + 0.5) * band;
    const c = groups.length > 0 ? color(groups.indexOf(r.group)) : color(0);
    body.push(textEl(f.left - 7, cy + 4, r.label, { "text-anchor": "end", "font-size": 10 }));
    body.push(el("line", { x1: x(r.lower), y1: cy, x2: x(r.upper), y2: cy, stroke: c, "stroke-width": 1.4 }));
    body.push(el("line", { x1: x(r.lower), y1: cy - 4, x2: x(r.lower), y2: cy + 4, stroke: c, "stroke-width": 1.4 }));
    body.push(el("line", { x1: x(r.upper), y1: cy - 4, x2: x(r.upper), y2: cy + 4, stroke: c, "stroke-width": 1.4 }));
    body.push(el("circle", { cx: x(r.beta), cy, r: 3.5, fill: c }));
  });
  if (opts.yLabel) {
    const lx = 16;
    const ly = f.top + f.plotHeight / 2;
    body.push(textEl(lx, ly, opts.yLabel, {
      "text-anchor": "middle", "font-size": 12, transform: `rotate(-90 ${fmt(lx)} ${fmt(ly)})`,
    }));
  }
  body.push(...legend(f, groups));
  return svgDocument(opts.width, opts.height, body);
}
