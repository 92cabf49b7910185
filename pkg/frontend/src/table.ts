import { readFileSync } from "fs";
import Papa from "papaparse";
import { EmptyInput, MissingColumn } from "./errors.js";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

/** Parse a headered CSV file. Zero data rows is legal here; charts decide. */
export function readTable(path: string): Table {
  const text = readFileSync(path, "utf8");
  if (text.trim() === "") {
    throw new EmptyInput(`${path} is empty`);
  }
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  const fatal = parsed.errors.filter((e) => e.code !== "TooFewFields" && e.code !== "TooManyFields");
  if (fatal.length > 0) {
    throw new EmptyInput(`${path}: ${fatal[0].message}`);
  }
  return { columns: parsed.meta.fields ?? [], rows: parsed.data };
}

export function requireColumns(table: Table, needed: string[], kind: string): void {
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new MissingColumn(kind, missing, table.columns);
  }
}

/** Empty cells and unparseable text both come back null so callers can skip the row. */
export function numeric(row: Record<string, string>, col: string): number | null {
  const raw = (row[col] ?? "").trim();
  if (raw === "") return null;
  const v = Number(raw);
  return Number.isFinite(v) ? v : null;
}

export function truthy(row: Record<string, string>, col: string): boolean {
  const raw = (row[col] ?? "").trim().toLowerCase();
  return raw === "true" || raw === "1";
}

export function groupLabel(row: Record<string, string>, keys: string[]): string {
  return keys.map((k) => row[k] ?? "").join(" / ");
}

/** Distinct group labels in first-appearance order; the legend contract. */
export function groupsInOrder(rows: Record<string, string>[], keys: string[]): string[] {
  const seen: string[] = [];
  for (const row of rows) {
    const label = groupLabel(row, keys);
    if (!seen.includes(label)) seen.push(label);
  }
  return seen;
}
