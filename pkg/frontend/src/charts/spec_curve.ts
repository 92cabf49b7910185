import { EmptyInput } from "../errors.js";
import { Table, groupLabel, groupsInOrder, numeric, requireColumns, truthy } from "../table.js";
import { el, svgDocument } from "../svg.js";
import { extent, linearScale, niceTicks } from "../scale.js";
import {
  ChartOptions, color, frameFor, legend, titleBlock, xAxis, yAxis,
  yScaleFromTicks, zeroLine,
} from "./frame.js";

interface Point {
  beta: number;
  lower: number;
  upper: number;
  significant: boolean;
  group: string;
}

/**
 * Every estimate in ascending order with its CI whisker. Filled markers are
 * significant rows, open markers are not. The sort is stable, so a CSV
 * already sorted by beta1 keeps exactly its row order.
 */
export function specCurve(table: Table, opts: ChartOptions): string {
  requireColumns(table, ["beta1", "lower", "upper"], "spec_curve");
  const hasSig = table.columns.includes("significant");
  const points: Point[] = [];
  for (const row of table.rows) {
    const beta = numeric(row, "beta1");
    const lower = numeric(row, "lower");
    const upper = numeric(row, "upper");
    if (beta === null || lower === null || upper === null) continue;
    points.push({
      beta,
      lower,
      upper,
      significant: hasSig ? truthy(row, "significant") : false,
      group: groupLabel(row, opts.groupBy),
    });
  }
  if (points.length === 0) throw new EmptyInput("spec_curve needs rows with beta1, lower, upper");
  points.sort((a, b) => a.beta - b.beta);

  const groups = opts.groupBy.length > 0 ? groupsInOrder(table.rows, opts.groupBy) : [];
  const f = frameFor(opts, groups.length);
  const ticks = niceTicks(...extent(points.flatMap((p) => [p.lower, p.upper])));
  const y = yScaleFromTicks(f, ticks);
  const n = points.length;
  const x = linearScale([0.5, n + 0.5], [f.left, f.left + f.plotWidth]);

  // integer rank ticks only, clipped to 1..n
  const rankValues = niceTicks(1, n, Math.min(8, n)).values
    .filter((v) => v >= 1 && v <= n && Number.isInteger(v));
  const rankTicks = { values: rankValues, labels: rankValues.map(String), domain: x.domain };

  const body: string[] = [...titleBlock(opts)];
  body.push(...yAxis(f, y, ticks, opts.yLabel ?? "estimate"));
  body.push(...xAxis(f, x, rankTicks, opts.xLabel ?? "rank (ascending estimate)"));
  body.push(...zeroLine(f, y, "y"));

  points.forEach((p, i) => {
    const cx = x(i + 1);
    const c = groups.length > 0 ? color(groups.indexOf(p.group)) : color(0);
    body.push(el("line", { x1: cx, y1: y(p.lower), x2: cx, y2: y(p.upper), stroke: c, "stroke-width": 1.2 }));
    body.push(el("circle", {
      cx, cy: y(p.beta), r: 3.5,
      fill: p.significant ? c : "#ffffff",
      stroke: c, "stroke-width": 1.2,
    }));
  });
  body.push(...legend(f, groups));
  return svgDocument(opts.width, opts.height, body);
}
