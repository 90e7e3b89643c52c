/**
 * The five plot kinds over the simulator's output files.
 *
 *   energy       diag.csv            E_u, E_U vs t, max-rel-drift annotation
 *   residual-dt  residual_vs_dt.csv  log-log residual vs dt with fitted slope
 *   sweep        sweep.csv           log-log velocity gap vs dissipation strength
 *   spectra      lp.csv              dyadic block norms per snapshot
 *   stability    stability.csv       twin-run separation D(t) vs its envelope
 *
 * Renderers are read-only over the inputs: they plot and fit what the
 * solver wrote, never recompute it.
 */

import { writeFileSync, readFileSync, existsSync } from "fs";
import path from "path";

import { Table, col, readTable } from "./csv";
import { logLogSlope } from "./fit";
import { readSnapshotHeader } from "./snapshot";
import { Series, buildChart } from "./svg";

export type PlotKind = "energy" | "residual-dt" | "sweep" | "spectra" | "stability";

export const PLOT_KINDS: PlotKind[] = ["energy", "residual-dt", "sweep", "spectra", "stability"];

export interface PlotJob {
  kind: PlotKind;
  /** primary CSV input */
  input: string;
  /** output SVG path */
  out: string;
  /** spectra: directory holding the .oddf files named in lp.csv */
  snapshotsDir?: string;
  /** stability: run_meta.json carrying the pass flag and shared constant */
  meta?: string;
  title?: string;
}

export interface RenderResult {
  out: string;
  /** annotation lines, also printed to stdout by the CLI */
  notes: string[];
}

const COLORS = ["#4361ee", "#e63946", "#2d6a4f", "#f77f00", "#9d4edd", "#118ab2"];

function fmt(v: number): string {
  return v.toExponential(2);
}

function relDrift(values: number[]): number {
  const base = values[0];
  if (base === 0) return Math.max(...values.map(Math.abs));
  return Math.max(...values.map((v) => Math.abs(v - base))) / Math.abs(base);
}

/** Straight line through a log-log fit, evaluated at the data's x range. */
function fitLine(xs: number[], slope: number, intercept: number): Series {
  const lo = Math.min(...xs);
  const hi = Math.max(...xs);
  const y = (x: number) => Math.pow(10, intercept + slope * Math.log10(x));
  return {
    x: [lo, hi],
    y: [y(lo), y(hi)],
    color: "#888",
    label: `fit: slope ${slope.toFixed(2)}`,
    dash: "6,3",
    width: 1.1,
  };
}

function groupRows(keys: string[]): Map<string, number[]> {
  const groups = new Map<string, number[]>();
  keys.forEach((k, i) => {
    const idxs = groups.get(k);
    if (idxs) idxs.push(i);
    else groups.set(k, [i]);
  });
  return groups;
}

function pick(values: number[], idxs: number[]): number[] {
  return idxs.map((i) => values[i]);
}

// ---------------------------------------------------------------------------
// renderers
// ---------------------------------------------------------------------------

function renderEnergy(job: PlotJob): RenderResult {
  const table = readTable(job.input, { numeric: ["t", "E_u", "E_U"] });
  const t = col(table, "t");
  const eu = col(table, "E_u");
  const eU = col(table, "E_U");
  const driftU = relDrift(eu);
  const driftUU = relDrift(eU);
  const notes = [
    `max rel drift E_u = ${fmt(driftU)}`,
    `max rel drift E_U = ${fmt(driftUU)}`,
  ];
  const svg = buildChart({
    title: job.title ?? "Weighted energies",
    subtitle: `${table.rows} samples, t in [${t[0]}, ${t[t.length - 1]}]`,
    xLabel: "t",
    yLabel: "energy",
    series: [
      { x: t, y: eu, color: COLORS[0], label: "E_u" },
      { x: t, y: eU, color: COLORS[1], label: "E_U" },
    ],
    annotations: notes,
  });
  writeFileSync(job.out, svg);
  return { out: job.out, notes };
}

function renderResidualDt(job: PlotJob): RenderResult {
  const table = readTable(job.input, { numeric: ["dt", "residual"] });
  const dt = col(table, "dt");
  const res = col(table, "residual");
  const fit = logLogSlope(dt, res, true);
  const excluded = fit.used < dt.length;
  const notes = [
    `fitted slope = ${fit.slope.toFixed(2)}${excluded ? " (coarsest dt excluded)" : ""}`,
  ];
  const fitXs = excluded ? dt.filter((v) => v !== Math.max(...dt)) : dt;
  const svg = buildChart({
    title: job.title ?? "Constraint residual vs time step",
    xLabel: "dt",
    yLabel: "residual",
    xLog: true,
    yLog: true,
    series: [
      { x: dt, y: res, color: COLORS[0], label: "residual", markers: true },
      fitLine(fitXs, fit.slope, fit.intercept),
    ],
    annotations: notes,
  });
  writeFileSync(job.out, svg);
  return { out: job.out, notes };
}

function renderSweep(job: PlotJob): RenderResult {
  const table = readTable(job.input, { numeric: ["epsilon", "u_gap"] });
  const eps = col(table, "epsilon");
  const gap = col(table, "u_gap");
  const fit = logLogSlope(eps, gap, false);
  const notes = [`fitted slope = ${fit.slope.toFixed(2)}`];
  const svg = buildChart({
    title: job.title ?? "Dissipation sweep",
    xLabel: "epsilon",
    yLabel: "velocity gap at T",
    xLog: true,
    yLog: true,
    series: [
      { x: eps, y: gap, color: COLORS[0], label: "u gap", markers: true },
      fitLine(eps, fit.slope, fit.intercept),
    ],
    annotations: notes,
  });
  writeFileSync(job.out, svg);
  return { out: job.out, notes };
}

function renderSpectra(job: PlotJob): RenderResult {
  const table = readTable(job.input, {
    numeric: ["t", "j", "u_block", "rho_block"],
    text: ["snapshot"],
  });
  const names = table.text.get("snapshot")!;
  const t = col(table, "t");
  const j = col(table, "j");
  const ub = col(table, "u_block");
  const rb = col(table, "rho_block");
  const groups = groupRows(names);

  let subtitle: string | undefined;
  const notes: string[] = [];
  if (job.snapshotsDir) {
    const headers = [...groups.keys()].map((name) =>
      readSnapshotHeader(path.join(job.snapshotsDir!, name))
    );
    for (const h of headers) {
      const idxs = groups.get(path.basename(h.file))!;
      const tCsv = t[idxs[0]];
      if (Math.abs(h.t - tCsv) > 1e-9 * Math.max(1, Math.abs(tCsv))) {
        throw new Error(
          `${h.file}: snapshot time ${h.t} does not match lp table time ${tCsv}`
        );
      }
    }
    const { n, length } = headers[0];
    subtitle = `${groups.size} snapshots, grid ${n}x${n}, box length ${length.toPrecision(4)}`;
    notes.push(`snapshot headers agree with table times (n=${n})`);
  }

  const series: Series[] = [];
  let color = 0;
  for (const [name, idxs] of groups) {
    const c = COLORS[color++ % COLORS.length];
    const label = `t=${t[idxs[0]].toPrecision(3)}`;
    series.push({ x: pick(j, idxs), y: pick(ub, idxs), color: c, label: `u ${label}`, markers: true });
    series.push({ x: pick(j, idxs), y: pick(rb, idxs), color: c, label: `rho ${label}`, dash: "4,3", width: 1 });
  }
  const jMax = Math.max(...j);
  notes.push(`${groups.size} snapshots, dyadic bands j = ${Math.min(...j)}..${jMax}`);
  const svg = buildChart({
    title: job.title ?? "Dyadic block norms",
    subtitle,
    xLabel: "band j",
    yLabel: "block L2 norm",
    yLog: true,
    series,
    annotations: notes,
  });
  writeFileSync(job.out, svg);
  return { out: job.out, notes };
}

function renderStability(job: PlotJob): RenderResult {
  const table = readTable(job.input, {
    numeric: ["delta0", "t", "D", "I", "envelope"],
  });
  const delta0 = col(table, "delta0");
  const t = col(table, "t");
  const D = col(table, "D");
  const env = col(table, "envelope");

  const groups = groupRows(delta0.map((v) => v.toExponential(2)));
  const series: Series[] = [];
  let color = 0;
  let covered = true;
  for (const [key, idxs] of groups) {
    const c = COLORS[color++ % COLORS.length];
    const label = `d0=${Number(key).toExponential(0)}`;
    series.push({ x: pick(t, idxs), y: pick(D, idxs), color: c, label: `D ${label}`, width: 1.6 });
    series.push({ x: pick(t, idxs), y: pick(env, idxs), color: c, label: `envelope ${label}`, dash: "6,3", width: 1 });
    for (const i of idxs) {
      if (env[i] < D[i] * (1 - 1e-9)) covered = false;
    }
  }

  const notes: string[] = [];
  if (job.meta) {
    const meta = JSON.parse(readFileSync(job.meta, "utf-8"));
    if (meta.passed !== undefined) {
      notes.push(`study ${meta.passed ? "PASS" : "FAIL"}, shared C = ${meta.C_shared}`);
    }
  }
  notes.push(covered ? "envelope covers D(t) at every sample" : "envelope violated");

  const svg = buildChart({
    title: job.title ?? "Twin-run separation vs growth envelope",
    xLabel: "t",
    yLabel: "D(t)",
    yLog: true,
    series,
    annotations: notes,
  });
  writeFileSync(job.out, svg);
  return { out: job.out, notes };
}

// ---------------------------------------------------------------------------

export function render(job: PlotJob): RenderResult {
  if (!existsSync(job.input)) {
    throw new Error(`input not found: ${job.input}`);
  }
  switch (job.kind) {
    case "energy":
      return renderEnergy(job);
    case "residual-dt":
      return renderResidualDt(job);
    case "sweep":
      return renderSweep(job);
    case "spectra":
      return renderSpectra(job);
    case "stability":
      return renderStability(job);
    default:
      throw new Error(`unknown plot kind: ${(job as PlotJob).kind}`);
  }
}
