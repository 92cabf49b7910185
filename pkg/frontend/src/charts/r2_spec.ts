import { EmptyInput } from "../errors.js";
import { Table, groupLabel, groupsInOrder, numeric, requireColumns } from "../table.js";
import { el, fmt, svgDocument, textEl } from "../svg.js";
import { extent, linearScale, niceTicks } from "../scale.js";
import { ChartOptions, color, frameFor, legend, titleBlock, xAxis, xScaleFromTicks } from "./frame.js";

interface RowCI {
  value: number;
  lower: number;
  upper: number;
  label: string;
  group: string;
}

/** Horizontal dot-and-whisker of mean adjusted R2 per group, CSV row order top to bottom. */
export function r2Spec(table: Table, opts: ChartOptions): string {
  requireColumns(table, ["mean_adj_r2", "lower", "upper", ...opts.groupBy], "r2_spec");
  const rows: RowCI[] = [];
  for (const row of table.rows) {
    const value = numeric(row, "mean_adj_r2");
    const lower = numeric(row, "lower");
    const upper = numeric(row, "upper");
    if (value === null || lower === null || upper === null) continue;
    rows.push({
      value,
      lower,
      upper,
      label: groupLabel(row, opts.groupBy),
      group: opts.groupBy.length > 0 ? (row[opts.groupBy[0]] ?? "") : "",
    });
  }
  if (rows.length === 0) throw new EmptyInput("r2_spec needs rows with mean_adj_r2, lower, upper");

  const groups = opts.groupBy.length > 0
    ? groupsInOrder(table.rows, [opts.groupBy[0]])
    : [];
  const labelWidth = Math.min(180, 10 + 6 * Math.max(...rows.map((r) => r.label.length)));
  const f = frameFor(opts, groups.length, labelWidth);
  const ticks = niceTicks(...extent(rows.flatMap((r) => [r.lower, r.upper])));
  const x = xScaleFromTicks(f, ticks);
  const band = f.plotHeight / rows.length;

  const body: string[] = [...titleBlock(opts)];
  body.push(...xAxis(f, x, ticks, opts.xLabel ?? "mean adjusted R2"));
  body.push(el("line", { x1: f.left, y1: f.top, x2: f.left, y2: f.bottom, stroke: "#333", "stroke-width": 1 }));

  rows.forEach((r, i) => {
    const cy = f.top + (i + 0.5) * band;
    const c = groups.length > 0 ? color(groups.indexOf(r.group)) : color(0);
    body.push(textEl(f.left - 7, cy + 4, r.label, { "text-anchor": "end", "font-size": 10 }));
    body.push(el("line", { x1: x(r.lower), y1: cy, x2: x(r.upper), y2: cy, stroke: c, "stroke-width": 1.4 }));
    body.push(el("circle", { cx: x(r.value), cy, r: 3.5, fill: c }));
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
