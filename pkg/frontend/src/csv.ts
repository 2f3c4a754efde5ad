/**
 * CSV loading with schema validation.
 *
 * Each figure kind has a fixed header contract (see ../../schemas.md).
 * Rendering never recomputes statistics: rows are consumed as-is.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export type FigureKind = "se" | "roc" | "poscdf" | "snapshot" | "chanmse";

export const SCHEMAS: Record<FigureKind, string[]> = {
  se: [
    "scenario",
    "denoiser_mode",
    "t",
    "se_mse",
    "emp_mse_pooled",
    "emp_mse_mean",
    "emp_mse_stderr",
    "runs",
  ],
  roc: ["scenario", "denoiser_mode", "kind", "tau_log", "p_fa", "p_md", "n_trials"],
  poscdf: ["scenario", "denoiser_mode", "estimator", "p", "error_km", "n_samples"],
  snapshot: ["role", "location", "message", "grid_index", "x_km", "y_km", "objective"],
  chanmse: ["snr_rx_db", "estimator", "mse", "runs"],
};

export type Row = Record<string, string>;

export class SchemaError extends Error {}
export class NoDataError extends Error {}

export function parseCsv(text: string, kind: FigureKind, source = "<csv>"): Row[] {
  const parsed = Papa.parse<Row>(text.trim(), { header: true, skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${source}: ${parsed.errors[0].message}`);
  }
  const header = parsed.meta.fields ?? [];
  const missing = SCHEMAS[kind].filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `${source}: not a valid '${kind}' table, missing columns: ${missing.join(", ")}`
    );
  }
  if (parsed.data.length === 0) {
    throw new NoDataError(`${source}: header is valid but the table has no data rows`);
  }
  return parsed.data;
}

export function loadCsv(paths: string[], kind: FigureKind): Row[] {
  const rows: Row[] = [];
  for (const p of paths) {
    rows.push(...parseCsv(readFileSync(p, "utf-8"), kind, p));
  }
  return rows;
}

export const num = (row: Row, col: string): number => Number(row[col]);
