import { EmptyInput } from "../errors.js";
import { Table, groupLabel, groupsInOrder, numeric, requireColumns } from "../table.js";
import { el, fmt, svgDocument } from "../svg.js";
import { extent, linearScale, niceTicks } from "../scale.js";
import {
  ChartOptions, color, frameFor, legend, titleBlock, xAxis, yAxis, yScaleFromTicks,
} from "./frame.js";

export const DENSITY_BINS = 40;

export interface Density {
  centers: number[];
  density: number[];
}

/** Histogram density on a fixed shared grid; integrates to 1 over the domain. */
export function histogramDensity(values: number[], lo: number, hi: number, bins = DENSITY_BINS): Density {
  const width = (hi - lo) / bins;
  const counts = new Array<number>(bins).fill(0);
  for (const v of values) {
    let b = Math.floor((v - lo) / width);
    if (b === bins) b = bins - 1; // hi itself lands in the last bin
    if (b >= 0 && b < bins) counts[b] += 1;
  }
  const n = values.length;
  return {
    centers: counts.map((_, i) => lo + (i + 0.5) * width),
    density: counts.map((c) => c / (n * width)),
  };
}

/** One density polyline per group over a shared x grid, legend in CSV order. */
export function metricDensity(table: Table, opts: ChartOptions): string {
  requireColumns(table, ["value", ...opts.groupBy], "metric_density");
  const byGroup = new Map<string, number[]>();
  for (const row of table.rows) {
    const v = numeric(row, "value");
    if (v === null) continue;
    const label = groupLabel(row, opts.groupBy);
    const bucket = byGroup.get(label);
    if (bucket === undefined) byGroup.set(label, [v]);
    else bucket.push(v);
  }
  if (byGroup.size === 0) throw new EmptyInput("metric_density needs rows with numeric value");

  const groups = groupsInOrder(table.rows, opts.groupBy).filter((g) => byGroup.has(g));
  const all = [...byGroup.values()].flat();
  const [lo, hi] = extent(all);
  const series = groups.map((g) => histogramDensity(byGroup.get(g)!, lo, hi));

  const f = frameFor(opts, groups.length);
  const xTicks = niceTicks(lo, hi);
  const x = linearScale(xTicks.domain, [f.left, f.left + f.plotWidth]);
  const maxDensity = Math.max(...series.flatMap((s) => s.density));
  const yTicks = niceTicks(0, maxDensity === 0 ? 1 : maxDensity);
  const y = yScaleFromTicks(f, yTicks);

  const body: string[] = [...titleBlock(opts)];
  body.push(...xAxis(f, x, xTicks, opts.xLabel ?? "value"));
  body.push(...yAxis(f, y, yTicks, opts.yLabel ?? "density"));

  series.forEach((s, gi) => {
    const pts = s.centers.map((c, i) => `${fmt(x(c))},${fmt(y(s.density[i]))}`).join(" ");
    body.push(el("polyline", {
      points: pts,
      fill: "none",
      stroke: color(gi),
      "stroke-width": 1.6,
    }));
  });
  body.push(...legend(f, groups));
  return svgDocument(opts.width, opts.height, body);
}
