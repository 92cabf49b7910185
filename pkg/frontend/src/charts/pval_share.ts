import { EmptyInput } from "../errors.js";
import { Table, groupLabel, groupsInOrder, numeric, requireColumns } from "../table.js";
import { el, svgDocument, textEl } from "../svg.js";
import { linearScale } from "../scale.js";
import { ChartOptions, color, frameFor, legend, titleBlock, yAxis } from "./frame.js";

interface Bar {
  share: number;
  lower: number;
  upper: number;
  group: string;
  tick: string;
}

/**
 * One bar per row at the significant share, whiskered with its CI.
 * Shares live in [0, 1] by construction, so the y domain is fixed; that
 * keeps charts comparable across batteries.
 */
export function pvalShare(table: Table, opts: ChartOptions): string {
  requireColumns(table, ["share", "lower", "upper", ...opts.groupBy], "pval_share");
  const hasLevel = table.columns.includes("level");
  const bars: Bar[] = [];
  for (const row of table.rows) {
    const share = numeric(row, "share");
    const lower = numeric(row, "lower");
    const upper = numeric(row, "upper");
    if (share === null || lower === null || upper === null) continue;
    const group = groupLabel(row, opts.groupBy);
    bars.push({
      share,
      lower,
      upper,
      group,
      tick: hasLevel ? `${group} @${row["level"]}` : group,
    });
  }
  if (bars.length === 0) throw new EmptyInput("pval_share needs rows with share, lower, upper");

  const groups = groupsInOrder(table.rows, opts.groupBy);
  const f = frameFor(opts, groups.length);
  const yTicks = {
    values: [0, 0.25, 0.5, 0.75, 1],
    labels: ["0", "0.25", "0.5", "0.75", "1"],
    domain: [0, 1] as [number, number],
  };
  const y = linearScale(yTicks.domain, [f.bottom, f.top]);
  const band = f.plotWidth / bars.length;
  const barWidth = band * 0.6;

  const body: string[] = [...titleBlock(opts)];
  body.push(...yAxis(f, y, yTicks, opts.yLabel ?? "share significant"));
  body.push(el("line", {
    x1: f.left, y1: f.bottom, x2: f.left + f.plotWidth, y2: f.bottom,
    stroke: "#333", "stroke-width": 1,
  }));

  bars.forEach((b, i) => {
    const cx = f.left + (i + 0.5) * band;
    const c = color(groups.indexOf(b.group));
    body.push(el("rect", {
      x: cx - barWidth / 2,
      y: y(b.share),
      width: barWidth,
      height: f.bottom - y(b.share),
      fill: c,
      "fill-opacity": "0.85",
    }));
    body.push(el("line", { x1: cx, y1: y(b.lower), x2: cx, y2: y(b.upper), stroke: "#222", "stroke-width": 1.2 }));
    body.push(el("line", { x1: cx - 4, y1: y(b.lower), x2: cx + 4, y2: y(b.lower), stroke: "#222", "stroke-width": 1.2 }));
    body.push(el("line", { x1: cx - 4, y1: y(b.upper), x2: cx + 4, y2: y(b.upper), stroke: "#222", "stroke-width": 1.2 }));
    body.push(textEl(cx, f.bottom + 15, b.tick, { "text-anchor": "middle", "font-size": 10 }));
  });
  if (opts.xLabel) {
    body.push(textEl(f.left + f.plotWidth / 2, f.bottom + 38, opts.xLabel, {
      "text-anchor": "middle", "font-size": 12,
    }));
  }
  body.push(...legend(f, groups));
  return svgDocument(opts.width, opts.height, body);
}
