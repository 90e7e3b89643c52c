/** Least-squares line fits for convergence-order annotations. */

export interface Fit {
  slope: number;
  intercept: number;
  /** points actually used (after any exclusion) */
  used: number;
}

export function leastSquares(xs: number[], ys: number[]): Fit {
  if (xs.length !== ys.length || xs.length < 2) {
    throw new Error(`need at least 2 points to fit, got ${xs.length}`);
  }
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i] - mx) ** 2;
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx === 0) throw new Error("fit is degenerate: all x equal");
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx, used: n };
}

/**
 * Slope of log10(y) against log10(x).  With `dropCoarsest` (and at least
 * three points) the largest x is excluded so the fit reads the asymptotic
 * regime rather than the pre-asymptotic first point.
 */
export function logLogSlope(xs: number[], ys: number[], dropCoarsest = false): Fit {
  for (let i = 0; i < xs.length; i++) {
    if (!(xs[i] > 0) || !(ys[i] > 0)) {
      throw new Error(`log-log fit needs positive data, got (${xs[i]}, ${ys[i]})`);
    }
  }
  let px = xs;
  let py = ys;
  if (dropCoarsest && xs.length >= 3) {
    const coarsest = xs.indexOf(Math.max(...xs));
    px = xs.filter((_, i) => i !== coarsest);
    py = ys.filter((_, i) => i !== coarsest);
  }
  return leastSquares(px.map(Math.log10), py.map(Math.log10));
}
