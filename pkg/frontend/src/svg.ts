/**
 * Minimal deterministic SVG writer.
 *
 * Same element calls in the same order produce the same bytes: attributes
 * render in insertion order and every coordinate goes through one fixed
 * number format. No timestamps, ids, or randomness anywhere.
 */

export function fmt(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`non-finite coordinate ${x}`);
  const s = x.toFixed(2);
  const trimmed = s.replace(/\.?0+$/, "");
  return trimmed === "-0" || trimmed === "" ? "0" : trimmed;
}

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export type Attrs = Record<string, string | number>;

function attrText(attrs: Attrs): string {
  const parts: string[] = [];
  for (const [k, v] of Object.entries(attrs)) {
    const text = typeof v === "number" ? fmt(v) : esc(v);
    parts.push(`${k}="${text}"`);
  }
  return parts.length > 0 ? " " + parts.join(" ") : "";
}

export function el(name: string, attrs: Attrs, children?: string[]): string {
  if (children === undefined) return `<${name}${attrText(attrs)}/>`;
  return `<${name}${attrText(attrs)}>${children.join("")}</${name}>`;
}

export function textEl(x: number, y: number, content: string, attrs: Attrs = {}): string {
  return el("text", { x, y, ...attrs }, [esc(content)]);
}

export function svgDocument(width: number, height: number, body: string[]): string {
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${fmt(width)}" ` +
    `height="${fmt(height)}" viewBox="0 0 ${fmt(width)} ${fmt(height)}" ` +
    `font-family="Helvetica, Arial, sans-serif">`;
  return [head, ...body, "</svg>", ""].join("\n");
}
