/**
 * Schema-checked CSV reading for the simulator's diagnostic tables.
 *
 * Each plot kind declares the columns it needs; anything missing or
 * non-numeric raises a SchemaError naming the offending column, so a
 * truncated or hand-edited file fails loudly instead of plotting garbage.
 */

import { readFileSync } from "fs";
import { parse } from "papaparse";

/** A CSV failed validation; `column` names the offending column. */
export class SchemaError extends Error {
  readonly file: string;
  readonly column: string;

  constructor(file: string, column: string, detail: string) {
    super(`${file}: column "${column}" ${detail}`);
    this.name = "SchemaError";
    this.file = file;
    this.column = column;
  }
}

export interface Table {
  file: string;
  columns: string[];
  /** numeric columns, keyed by name, all the same length */
  data: Map<string, number[]>;
  /** raw string columns (e.g. snapshot file names) */
  text: Map<string, string[]>;
  rows: number;
}

export interface TableSpec {
  /** columns that must exist and parse as finite-or-infinite numbers */
  numeric: string[];
  /** columns that must exist and are kept as strings */
  text?: string[];
}

export function readTable(file: string, spec: TableSpec): Table {
  const raw = readFileSync(file, "utf-8");
  const parsed = parse<Record<string, string>>(raw.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new Error(`${file}: unparseable CSV (${e.message} at row ${e.row})`);
  }
  const header = parsed.meta.fields ?? [];
  const rows = parsed.data;
  if (rows.length === 0) {
    throw new Error(`${file}: no data rows`);
  }

  const wanted = [...spec.numeric, ...(spec.text ?? [])];
  for (const col of wanted) {
    if (!header.includes(col)) {
      throw new SchemaError(file, col, `is missing (header: ${header.join(",")})`);
    }
  }

  const data = new Map<string, number[]>();
  for (const col of spec.numeric) {
    const values = rows.map((row, i) => {
      const cell = row[col];
      const v = cell === "inf" ? Infinity : Number(cell);
      if (cell === undefined || cell === "" || Number.isNaN(v)) {
        throw new SchemaError(file, col, `has a non-numeric value at data row ${i + 1}: "${cell}"`);
      }
      return v;
    });
    data.set(col, values);
  }
  const text = new Map<string, string[]>();
  for (const col of spec.text ?? []) {
    text.set(col, rows.map((row) => row[col] ?? ""));
  }
  return { file, columns: header, data, text, rows: rows.length };
}

/** Convenience: fetch a column that the TableSpec marked as required. */
export function col(table: Table, name: string): number[] {
  const v = table.data.get(name);
  if (!v) throw new SchemaError(table.file, name, "was not requested in the table spec");
  return v;
}
