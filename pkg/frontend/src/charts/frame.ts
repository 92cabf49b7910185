import { el, fmt, textEl } from "../svg.js";
import { LinearScale, Ticks, linearScale } from "../scale.js";

/** Shared layout and axis plumbing so every chart kind lines up the same way. */

export const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b4", "#59a14f",
  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
] as const;

export function color(i: number): string {
  return PALETTE[i % PALETTE.length];
}

export interface ChartOptions {
  width: number;
  height: number;
  groupBy: string[];
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

export interface Frame {
  left: number;
  top: number;
  plotWidth: number;
  plotHeight: number;
  bottom: number;
  right: number;
}

export function frameFor(opts: ChartOptions, legendEntries: number, leftLabelWidth = 0): Frame {
  const legendWidth = legendEntries > 0 ? 150 : 16;
  const left = 58 + leftLabelWidth;
  const top = opts.title ? 40 : 20;
  const bottom = opts.height - (opts.xLabel ? 56 : 40);
  const right = opts.width - legendWidth;
  return {
    left,
    top,
    plotWidth: right - left,
    plotHeight: bottom - top,
    bottom,
    right,
  };
}

export function titleBlock(opts: ChartOptions): string[] {
  if (!opts.title) return [];
  return [
    textEl(opts.width / 2, 24, opts.title, {
      "text-anchor": "middle",
      "font-size": 15,
      "font-weight": "bold",
    }),
  ];
}

export function xAxis(f: Frame, scale: LinearScale, ticks: Ticks, label?: string): string[] {
  const out: string[] = [];
  out.push(el("line", {
    x1: f.left, y1: f.bottom, x2: f.left + f.plotWidth, y2: f.bottom,
    stroke: "#333", "stroke-width": 1,
  }));
  ticks.values.forEach((v, i) => {
    const x = scale(v);
    out.push(el("line", { x1: x, y1: f.bottom, x2: x, y2: f.bottom + 4, stroke: "#333", "stroke-width": 1 }));
    out.push(textEl(x, f.bottom + 17, ticks.labels[i], { "text-anchor": "middle", "font-size": 11 }));
  });
  if (label) {
    out.push(textEl(f.left + f.plotWidth / 2, f.bottom + 38, label, { "text-anchor": "middle", "font-size": 12 }));
  }
  return out;
}

export function yAxis(f: Frame, scale: LinearScale, ticks: Ticks, label?: string): string[] {
  const out: string[] = [];
  out.push(el("line", { x1: f.left, y1: f.top, x2: f.left, y2: f.bottom, stroke: "#333", "stroke-width": 1 }));
  ticks.values.forEach((v, i) => {
    const y = scale(v);
    out.push(el("line", { x1: f.left - 4, y1: y, x2: f.left, y2: y, stroke: "#333", "stroke-width": 1 }));
    out.push(textEl(f.left - 7, y + 4, ticks.labels[i], { "text-anchor": "end", "font-size": 11 }));
  });
  if (label) {
    const x = f.left - 44;
    const y = f.top + f.plotHeight / 2;
    out.push(textEl(x, y, label, {
      "text-anchor": "middle",
      "font-size": 12,
      transform: `rotate(-90 ${fmt(x)} ${fmt(y)})`,
    }));
  }
  return out;
}

/** Ordered swatch+label column on the right; order is the caller's contract. */
export function legend(f: Frame, entries: string[]): string[] {
  const out: string[] = [];
  entries.forEach((label, i) => {
    const y = f.top + 6 + i * 18;
    out.push(el("rect", { x: f.right + 12, y: y - 9, width: 12, height: 12, fill: color(i) }));
    out.push(textEl(f.right + 29, y + 1, label, { "font-size": 11 }));
  });
  return out;
}

export function zeroLine(f: Frame, scale: LinearScale, axis: "x" | "y"): string[] {
  const [d0, d1] = scale.domain;
  if (0 < Math.min(d0, d1) || 0 > Math.max(d0, d1)) return [];
  if (axis === "y") {
    const y = scale(0);
    return [el("line", {
      x1: f.left, y1: y, x2: f.left + f.plotWidth, y2: y,
      stroke: "#999", "stroke-width": 1, "stroke-dasharray": "4 3",
    })];
  }
  const x = scale(0);
  return [el("line", {
    x1: x, y1: f.top, x2: x, y2: f.bottom,
    stroke: "#999", "stroke-width": 1, "stroke-dasharray": "4 3",
  })];
}

export function yScaleFromTicks(f: Frame, ticks: Ticks): LinearScale {
  return linearScale(ticks.domain, [f.bottom, f.top]);
}

export function xScaleFromTicks(f: Frame, ticks: Ticks): LinearScale {
  return linearScale(ticks.domain, [f.left, f.left + f.plotWidth]);
}
