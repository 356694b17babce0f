/** Strict CSV reading for the simulator's artifact tables. */

import { readFileSync } from "fs";

export class FigureError extends Error {}

export interface Table {
  path: string;
  columns: string[];
  /** column name -> numeric values (NaN for non-numeric cells) */
  data: Map<string, number[]>;
  nRows: number;
}

export function parseCsv(text: string, path = "<string>"): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length < 1) {
    throw new FigureError(`${path}: empty CSV`);
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const data = new Map<string, number[]>(columns.map((c) => [c, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new FigureError(
        `${path}: row ${i} has ${cells.length} cells, expected ${columns.length}`
      );
    }
    for (let j = 0; j < columns.length; j++) {
      data.get(columns[j])!.push(Number(cells[j]));
    }
  }
  return { path, columns, data, nRows: lines.length - 1 };
}

export function readCsv(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch {
    throw new FigureError(`missing file "${path}"`);
  }
  return parseCsv(text, path);
}

export function requireColumns(table: Table, needed: string[]): void {
  for (const name of needed) {
    if (!table.columns.includes(name)) {
      throw new FigureError(`missing column "${name}" in ${table.path}`);
    }
  }
}

export function column(table: Table, name: string): number[] {
  const values = table.data.get(name);
  if (values === undefined) {
    throw new FigureError(`missing column "${name}" in ${table.path}`);
  }
  return values;
}

/** Distinct values of a column, in first-seen order. */
export function distinct(values: number[]): number[] {
  const out: number[] = [];
  for (const v of values) {
    if (!out.includes(v)) out.push(v);
  }
  return out;
}

/** Trapezoid rule over sample points; used to sanity-check density overlays. */
export function trapezoid(xs: number[], ys: number[]): number {
  let acc = 0;
  for (let i = 1; i < xs.length; i++) {
    acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
  }
  return acc;
}
