/** Figure builders for the simulator's CSV artifacts.
 *
 * Five kinds are supported:
 *   samplepaths        t, x_* columns                 -> slow-variable paths
 *   ensemble_mean      t, mean, stderr, theory        -> mean with 3 SE band
 *   histogram_vs_normal bin_left, bin_right, mass, analytic_pdf
 *                      (+ optional dense overlay CSV x, pdf)
 *   convergence_table  epsilon, t, observable, error  -> log-error curves
 *   decay_fit          lag, value, stderr (+ optional fit JSON)
 *
 * Input CSVs are read only; the single output is the SVG file.
 */

import { readFileSync, writeFileSync } from "fs";

import {
  FigureError, Table, column, distinct, readCsv, requireColumns, trapezoid,
} from "./csv";
import {
  PALETTE, axes, band, document, extent, legend, polyline, xScale, yScale,
} from "./svg";

export type FigureKind =
  | "samplepaths"
  | "ensemble_mean"
  | "histogram_vs_normal"
  | "convergence_table"
  | "decay_fit";

export const KINDS: FigureKind[] = [
  "samplepaths", "ensemble_mean", "histogram_vs_normal", "convergence_table",
  "decay_fit",
];

export interface FigureSpec {
  kind: FigureKind;
  csv: string;
  out: string;
  overlay?: string;
  fit?: string;
  title?: string;
}

export function render(spec: FigureSpec): void {
  if (!KINDS.includes(spec.kind)) {
    throw new FigureError(
      `unknown figure kind "${spec.kind}"; expected one of ${KINDS.join(", ")}`
    );
  }
  const table = readCsv(spec.csv);
  const svg = BUILDERS[spec.kind](table, spec);
  writeFileSync(spec.out, svg);
}

// ---------------------------------------------------------------------------

function samplePaths(table: Table, spec: FigureSpec): string {
  requireColumns(table, ["t"]);
  const t = column(table, "t");
  const series = table.columns.filter((c) => c !== "t");
  if (series.length === 0) {
    throw new FigureError(`missing column "x" in ${table.path}`);
  }
  const all = series.flatMap((c) => column(table, c));
  const sx = xScale(t[0], t[t.length - 1]);
  const sy = yScale(...extent(all));
  const parts = [axes(sx, sy, "t", "x", spec.title ?? "Slow-variable sample paths")];
  series.forEach((c, i) => {
    parts.push(polyline(t, column(table, c), sx, sy, PALETTE[i % PALETTE.length], 1.1));
  });
  parts.push(legend(series.map((c, i) => ({ label: c, color: PALETTE[i % PALETTE.length] }))));
  return document(parts.join("\n"));
}

function ensembleMean(table: Table, spec: FigureSpec): string {
  requireColumns(table, ["t", "mean", "stderr", "theory"]);
  const groups = table.columns.includes("epsilon")
    ? distinct(column(table, "epsilon"))
    : [NaN];
  const t = column(table, "t");
  const mean = column(table, "mean");
  const se = column(table, "stderr");
  const theory = column(table, "theory");
  const eps = table.columns.includes("epsilon") ? column(table, "epsilon") : null;

  const loHi = extent(mean.map((m, i) => m + 3 * se[i])
    .concat(mean.map((m, i) => m - 3 * se[i]), theory));
  const sx = xScale(Math.min(...t), Math.max(...t));
  const sy = yScale(...loHi);
  const parts = [axes(sx, sy, "t", "ensemble mean of x",
                      spec.title ?? "Ensemble mean vs homogenized theory")];
  const entries: Array<{ label: string; color: string; dash?: string }> = [];
  groups.forEach((g, gi) => {
    const idx = eps
      ? eps.map((v, i) => (v === g ? i : -1)).filter((i) => i >= 0)
      : t.map((_, i) => i);
    const gt = idx.map((i) => t[i]);
    const gm = idx.map((i) => mean[i]);
    const glo = idx.map((i) => mean[i] - 3 * se[i]);
    const ghi = idx.map((i) => mean[i] + 3 * se[i]);
    const color = PALETTE[gi % PALETTE.length];
    parts.push(band(gt, glo, ghi, sx, sy, color));
    parts.push(polyline(gt, gm, sx, sy, color, 1.6));
    entries.push({ label: eps ? `mean (eps=${g})` : "mean", color });
  });
  const idx0 = eps
    ? eps.map((v, i) => (v === groups[0] ? i : -1)).filter((i) => i >= 0)
    : t.map((_, i) => i);
  parts.push(polyline(idx0.map((i) => t[i]), idx0.map((i) => theory[i]), sx, sy,
                      "#111", 1.6, "6,4"));
  entries.push({ label: "theory", color: "#111", dash: "6,4" });
  parts.push(legend(entries));
  return document(parts.join("\n"));
}

function histogram(table: Table, spec: FigureSpec): string {
  requireColumns(table, ["bin_left", "bin_right", "mass", "analytic_pdf"]);
  const left = column(table, "bin_left");
  const right = column(table, "bin_right");
  const mass = column(table, "mass");
  const pdf = column(table, "analytic_pdf");
  const eps = table.columns.includes("epsilon") ? column(table, "epsilon") : null;
  const groups = eps ? distinct(eps) : [NaN];

  let overlay: { x: number[]; pdf: number[] } | null = null;
  if (spec.overlay) {
    const ot = readCsv(spec.overlay);
    requireColumns(ot, ["x", "pdf"]);
    overlay = { x: column(ot, "x"), pdf: column(ot, "pdf") };
  }

  // bars are drawn as densities so the analytic overlay shares the axis
  const density = mass.map((m, i) => m / (right[i] - left[i]));
  const yMax = Math.max(...density, ...pdf,
                        ...(overlay ? overlay.pdf : [0])) * 1.1;
  const xLo = overlay ? Math.min(...left, ...overlay.x) : Math.min(...left);
  const xHi = overlay ? Math.max(...right, ...overlay.x) : Math.max(...right);
  const sx = xScale(xLo, xHi);
  const sy = yScale(0, yMax);
  const parts = [axes(sx, sy, "x", "density",
                      spec.title ?? "Terminal histogram vs limiting normal")];
  const entries: Array<{ label: string; color: string; dash?: string }> = [];
  groups.forEach((g, gi) => {
    const idx = eps
      ? eps.map((v, i) => (v === g ? i : -1)).filter((i) => i >= 0)
      : left.map((_, i) => i);
    const color = PALETTE[gi % PALETTE.length];
    const bars = idx
      .map((i) => {
        const x = sx(left[i]);
        const w = sx(right[i]) - sx(left[i]);
        const y = sy(density[i]);
        const h = sy(0) - sy(density[i]);
        return `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${w.toFixed(2)}" height="${h.toFixed(2)}" fill="${color}" opacity="0.35" stroke="${color}"/>`;
      })
      .join("\n");
    parts.push(bars);
    entries.push({ label: eps ? `eps=${g}` : "sample", color });
  });
  if (overlay) {
    parts.push(polyline(overlay.x, overlay.pdf, sx, sy, "#111", 1.8));
  } else {
    const centers = left.map((l, i) => 0.5 * (l + right[i]));
    parts.push(polyline(centers, pdf, sx, sy, "#111", 1.8));
  }
  entries.push({ label: "limit density", color: "#111" });
  parts.push(legend(entries));
  return document(parts.join("\n"));
}

function convergenceTable(table: Table, spec: FigureSpec): string {
  requireColumns(table, ["epsilon", "t", "error"]);
  const eps = column(table, "epsilon");
  const t = column(table, "t");
  const err = column(table, "error");
  const obs = table.columns.includes("observable")
    ? readStrings(table.path, "observable")
    : t.map(() => "f");
  const keys: string[] = [];
  for (let i = 0; i < eps.length; i++) {
    const k = `eps=${eps[i]}, ${obs[i]}`;
    if (!keys.includes(k)) keys.push(k);
  }
  const positive = err.filter((e) => e > 0 && Number.isFinite(e));
  if (positive.length === 0) {
    throw new FigureError(`${table.path}: no positive errors to plot`);
  }
  const sx = xScale(Math.min(...t), Math.max(...t));
  const sy = yScale(Math.min(...positive) * 0.8, Math.max(...positive) * 1.5, true);
  const parts = [axes(sx, sy, "t", "|mean f(X_eps) - mean f(X)|",
                      spec.title ?? "Convergence toward the limiting semigroup")];
  const entries: Array<{ label: string; color: string }> = [];
  keys.forEach((k, ki) => {
    const idx = eps
      .map((v, i) => (`eps=${v}, ${obs[i]}` === k ? i : -1))
      .filter((i) => i >= 0);
    const color = PALETTE[ki % PALETTE.length];
    parts.push(polyline(idx.map((i) => t[i]), idx.map((i) => err[i]), sx, sy, color));
    entries.push({ label: k, color });
  });
  parts.push(legend(entries));
  return document(parts.join("\n"));
}

function decayFit(table: Table, spec: FigureSpec): string {
  requireColumns(table, ["lag", "value", "stderr"]);
  const lag = column(table, "lag");
  const value = column(table, "value");
  let fit: { model: string; C: number; rate: number } | null = null;
  if (spec.fit) {
    try {
      fit = JSON.parse(readFileSync(spec.fit, "utf-8"));
    } catch {
      throw new FigureError(`missing file "${spec.fit}"`);
    }
  }
  const positive = value.filter((v) => v > 0);
  if (positive.length === 0) {
    throw new FigureError(`${table.path}: no positive correlation values`);
  }
  const sx = xScale(lag[0], lag[lag.length - 1]);
  const sy = yScale(Math.min(...positive) * 0.5, Math.max(...positive) * 2, true);
  const parts = [axes(sx, sy, "lag t", "C(t)",
                      spec.title ?? "Correlation decay and fitted model")];
  const dots = lag
    .map((x, i) =>
      value[i] > 0
        ? `<circle cx="${sx(x).toFixed(2)}" cy="${sy(value[i]).toFixed(2)}" r="2.4" fill="${PALETTE[0]}"/>`
        : "")
    .join("\n");
  parts.push(dots);
  const entries = [{ label: "estimated C(t)", color: PALETTE[0] }];
  if (fit && !Number.isNaN(fit.rate)) {
    const ys = lag.map((x) =>
      fit!.model === "exponential"
        ? fit!.C * Math.exp(-fit!.rate * x)
        : x > 0
          ? fit!.C * Math.pow(x, -fit!.rate)
          : NaN);
    parts.push(polyline(lag, ys, sx, sy, "#e63946", 1.6, "5,3"));
    entries.push({ label: `${fit.model} fit`, color: "#e63946" });
  }
  parts.push(legend(entries));
  return document(parts.join("\n"));
}

/** Re-read a column as raw strings (for non-numeric cells like labels). */
function readStrings(path: string, name: string): string[] {
  const lines = readFileSync(path, "utf-8").split(/\r?\n/).filter((l) => l.length > 0);
  const cols = lines[0].split(",");
  const j = cols.indexOf(name);
  if (j < 0) throw new FigureError(`missing column "${name}" in ${path}`);
  return lines.slice(1).map((l) => l.split(",")[j]);
}

const BUILDERS: Record<FigureKind, (t: Table, s: FigureSpec) => string> = {
  samplepaths: samplePaths,
  ensemble_mean: ensembleMean,
  histogram_vs_normal: histogram,
  convergence_table: convergenceTable,
  decay_fit: decayFit,
};

export { FigureError, trapezoid };
