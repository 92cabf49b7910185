export interface LinearScale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const f = ((v: number) => (span === 0 ? (r0 + r1) / 2 : r0 + ((v - d0) / span) * (r1 - r0))) as LinearScale;
  f.domain = [d0, d1];
  f.range = [r0, r1];
  return f;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) throw new Error("extent of no values");
  if (lo === hi) {
    // degenerate domain; pad so the scale stays invertible
    const pad = lo === 0 ? 0.5 : Math.abs(lo) * 0.1;
    return [lo - pad, hi + pad];
  }
  return [lo, hi];
}

export interface Ticks {
  values: number[];
  labels: string[];
  domain: [number, number];
}

/**
 * 1-2-5 ticks covering [lo, hi], expanded outward to tick multiples.
 * Labels come from the step's own decimal places, so 0.30000000000004
 * never leaks into an axis.
 */
export function niceTicks(lo: number, hi: number, target = 5): Ticks {
  if (lo === hi) [lo, hi] = extent([lo]);
  const rawStep = (hi - lo) / Math.max(1, target);
  const mag = Math.floor(Math.log10(rawStep));
  const base = Math.pow(10, mag);
  let step = 10 * base;
  for (const m of [1, 2, 5]) {
    if (m * base >= rawStep) {
      step = m * base;
      break;
    }
  }
  const first = Math.floor(lo / step);
  const last = Math.ceil(hi / step);
  const decimals = Math.max(0, -Math.floor(Math.log10(step)));
  const values: number[] = [];
  const labels: string[] = [];
  for (let i = first; i <= last; i++) {
    const v = i * step;
    values.push(v);
    labels.push(v.toFixed(decimals));
  }
  return { values, labels, domain: [first * step, last * step] };
}
