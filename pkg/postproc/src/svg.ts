/**
 * Minimal dependency-free SVG line charts.
 *
 * Hand-assembled markup: one <polyline> per series, optional point
 * markers, linear or log10 axes, a legend box, and a free-text
 * annotation block (used for fitted slopes and drift read-outs).
 */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label: string;
  width?: number;
  dash?: string;     // stroke-dasharray
  markers?: boolean; // circle at every point (for sparse series)
  opacity?: number;
}

export interface ChartOpts {
  title: string;
  subtitle?: string;
  xLabel: string;
  yLabel: string;
  xLog?: boolean;
  yLog?: boolean;
  series: Series[];
  /** lines of text drawn in a box under the legend */
  annotations?: string[];
  width?: number;
  height?: number;
}

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const nice = [1, 2, 5, 10].map((m) => m * mag);
  const step = nice.find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 0.01; v += step) ticks.push(v);
  return ticks;
}

function decadeTicks(min: number, max: number): number[] {
  const lo = Math.floor(Math.log10(min));
  const hi = Math.ceil(Math.log10(max));
  const ticks: number[] = [];
  const step = Math.max(1, Math.ceil((hi - lo) / 8));
  for (let e = lo; e <= hi; e += step) ticks.push(Math.pow(10, e));
  return ticks;
}

function fmtTick(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  }
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return Number(v.toPrecision(4)).toString();
}

export function buildChart(opts: ChartOpts): string {
  const W = opts.width ?? 640;
  const H = opts.height ?? 400;
  const ml = 72;
  const mr = 24;
  const mt = opts.subtitle ? 52 : 40;
  const mb = 52;
  const pw = W - ml - mr;
  const ph = H - mt - mb;

  const finite = (vs: number[]) => vs.filter((v) => Number.isFinite(v));
  const xsAll = finite(opts.series.flatMap((s) => s.x));
  const ysRaw = finite(opts.series.flatMap((s) => s.y));
  const ysAll = opts.yLog ? ysRaw.filter((v) => v > 0) : ysRaw;
  if (xsAll.length === 0 || ysAll.length === 0) {
    throw new Error("nothing to plot: no finite data points");
  }

  const tx = (v: number) => (opts.xLog ? Math.log10(v) : v);
  const ty = (v: number) => (opts.yLog ? Math.log10(v) : v);
  let xMin = Math.min(...xsAll.map(tx));
  let xMax = Math.max(...xsAll.map(tx));
  let yMin = Math.min(...ysAll.map(ty));
  let yMax = Math.max(...ysAll.map(ty));
  if (xMax === xMin) {
    xMin -= 0.5;
    xMax += 0.5;
  }
  if (yMax === yMin) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  const padY = 0.06 * (yMax - yMin);
  yMin -= padY;
  yMax += padY;
  const xOf = (v: number) => ml + ((tx(v) - xMin) / (xMax - xMin)) * pw;
  const yOf = (v: number) => mt + ph - ((ty(v) - yMin) / (yMax - yMin)) * ph;

  let s = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">\n`;
  s += `<rect width="${W}" height="${H}" fill="#fff"/>\n`;
  s += `<text x="${ml}" y="20" font-size="13" font-weight="600" fill="#222">${esc(opts.title)}</text>\n`;
  if (opts.subtitle) {
    s += `<text x="${ml}" y="34" font-size="9" fill="#888">${esc(opts.subtitle)}</text>\n`;
  }

  // Ticks and grid
  const xTicks = opts.xLog
    ? decadeTicks(Math.pow(10, xMin), Math.pow(10, xMax))
    : niceTicks(xMin, xMax, 6);
  const yTicks = opts.yLog
    ? decadeTicks(Math.pow(10, yMin), Math.pow(10, yMax))
    : niceTicks(yMin, yMax, 6);

  for (const v of yTicks) {
    const y = yOf(v);
    if (y < mt - 1 || y > mt + ph + 1) continue;
    s += `<line x1="${ml}" y1="${y.toFixed(1)}" x2="${ml + pw}" y2="${y.toFixed(1)}" stroke="#eee" stroke-width="0.6"/>\n`;
    s += `<line x1="${ml - 4}" y1="${y.toFixed(1)}" x2="${ml}" y2="${y.toFixed(1)}" stroke="#333" stroke-width="0.6"/>\n`;
    s += `<text x="${ml - 7}" y="${(y + 3).toFixed(1)}" text-anchor="end" font-size="9" fill="#555">${esc(fmtTick(v, !!opts.yLog))}</text>\n`;
  }
  for (const v of xTicks) {
    const x = xOf(v);
    if (x < ml - 1 || x > ml + pw + 1) continue;
    s += `<line x1="${x.toFixed(1)}" y1="${mt}" x2="${x.toFixed(1)}" y2="${mt + ph}" stroke="#f3f3f3" stroke-width="0.6"/>\n`;
    s += `<line x1="${x.toFixed(1)}" y1="${mt + ph}" x2="${x.toFixed(1)}" y2="${mt + ph + 4}" stroke="#333" stroke-width="0.6"/>\n`;
    s += `<text x="${x.toFixed(1)}" y="${mt + ph + 15}" text-anchor="middle" font-size="9" fill="#555">${esc(fmtTick(v, !!opts.xLog))}</text>\n`;
  }

  // Series
  for (const sr of opts.series) {
    const pts: string[] = [];
    for (let i = 0; i < sr.x.length; i++) {
      const xv = sr.x[i];
      const yv = sr.y[i];
      if (!Number.isFinite(xv) || !Number.isFinite(yv)) continue;
      if (opts.yLog && yv <= 0) continue;
      if (opts.xLog && xv <= 0) continue;
      pts.push(`${xOf(xv).toFixed(1)},${yOf(yv).toFixed(1)}`);
    }
    if (pts.length === 0) continue;
    s += `<polyline fill="none" stroke="${sr.color}" stroke-width="${sr.width ?? 1.4}" opacity="${sr.opacity ?? 1}"${sr.dash ? ` stroke-dasharray="${sr.dash}"` : ""} points="${pts.join(" ")}"/>\n`;
    if (sr.markers) {
      for (const p of pts) {
        const [px, py] = p.split(",");
        s += `<circle cx="${px}" cy="${py}" r="2.6" fill="${sr.color}"/>\n`;
      }
    }
  }

  // Axes frame
  s += `<line x1="${ml}" y1="${mt}" x2="${ml}" y2="${mt + ph}" stroke="#333" stroke-width="0.8"/>\n`;
  s += `<line x1="${ml}" y1="${mt + ph}" x2="${ml + pw}" y2="${mt + ph}" stroke="#333" stroke-width="0.8"/>\n`;
  s += `<text x="${ml + pw / 2}" y="${H - 8}" text-anchor="middle" font-size="11" fill="#333">${esc(opts.xLabel)}</text>\n`;
  s += `<text x="16" y="${mt + ph / 2}" text-anchor="middle" font-size="11" fill="#333" transform="rotate(-90,16,${mt + ph / 2})">${esc(opts.yLabel)}</text>\n`;

  // Legend
  const lx = ml + 10;
  let ly = mt + 12;
  const legendW = Math.max(...opts.series.map((sr) => sr.label.length), 8) * 5.4 + 30;
  const legendH = opts.series.length * 13 + 8;
  s += `<rect x="${lx - 6}" y="${ly - 9}" width="${legendW}" height="${legendH}" rx="3" fill="white" fill-opacity="0.85" stroke="#ddd" stroke-width="0.5"/>\n`;
  for (const sr of opts.series) {
    s += `<line x1="${lx}" y1="${ly}" x2="${lx + 16}" y2="${ly}" stroke="${sr.color}" stroke-width="${sr.width ?? 1.4}"${sr.dash ? ` stroke-dasharray="${sr.dash}"` : ""}/>\n`;
    s += `<text x="${lx + 21}" y="${ly + 3}" font-size="9" fill="#444">${esc(sr.label)}</text>\n`;
    ly += 13;
  }

  // Annotation block
  if (opts.annotations && opts.annotations.length > 0) {
    const ax = ml + pw - 8;
    let ay = mt + 14;
    const aw = Math.max(...opts.annotations.map((a) => a.length)) * 5.6 + 16;
    const ah = opts.annotations.length * 13 + 8;
    s += `<rect x="${ax - aw}" y="${ay - 10}" width="${aw}" height="${ah}" rx="3" fill="#fffbe8" fill-opacity="0.92" stroke="#e0d9b0" stroke-width="0.6"/>\n`;
    for (const line of opts.annotations) {
      s += `<text x="${ax - 8}" y="${ay + 2}" text-anchor="end" font-size="9.5" fill="#333">${esc(line)}</text>\n`;
      ay += 13;
    }
  }

  s += `</svg>\n`;
  return s;
}
