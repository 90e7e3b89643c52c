"""Self-convergence of the time integrator on the reduced formulation.

Runs the same initial data at a ladder of step sizes, measures the final
velocity against a fine-step reference, and prints the observed orders
(expected: 4 for the classical four-stage scheme).  Optionally writes the
(dt, residual) table as CSV for plotting.
"""

import argparse
import csv

import numpy as np

from oddflow.dynamics import SimConfig, simulate
from oddflow.grid import l2_norm


def final_velocity(n, t_end, dt, formulation, epsilon, tol):
    steps = int(round(t_end / dt))
    cfg = SimConfig(n=n, t_end=t_end, dt=dt, formulation=formulation,
                    epsilon=epsilon, elliptic_tol=tol, output_every=steps)
    sim = simulate(cfg, record_residuals=False)
    return sim.states[-1].u


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=32, help="grid points per axis")
    parser.add_argument("--t-end", type=float, default=0.2, help="final time")
    parser.add_argument("--dts", type=float, nargs="+",
                        default=[2e-2, 1e-2, 5e-3, 2.5e-3],
                        help="step sizes, coarse to fine")
    parser.add_argument("--ref-dt", type=float, default=5e-4,
                        help="reference step size")
    parser.add_argument("--formulation", default="reduced",
                        choices=("reduced", "original", "elsasser", "regularized"))
    parser.add_argument("--epsilon", type=float, default=0.0,
                        help="dissipation strength (regularized only)")
    parser.add_argument("--elliptic-tol", type=float, default=1e-12,
                        help="pressure-solve tolerance (tight, so the time error "
                             "dominates down the ladder)")
    parser.add_argument("--out", help="write dt,residual CSV here")
    args = parser.parse_args()

    print(f"reference run: dt={args.ref_dt:g}")
    u_ref = final_velocity(args.n, args.t_end, args.ref_dt,
                           args.formulation, args.epsilon, args.elliptic_tol)
    errors = []
    for dt in args.dts:
        u = final_velocity(args.n, args.t_end, dt,
                           args.formulation, args.epsilon, args.elliptic_tol)
        errors.append(l2_norm(u - u_ref))
        print(f"dt={dt:<10g} residual={errors[-1]:.6e}")

    for (dt_c, e_c), (dt_f, e_f) in zip(zip(args.dts, errors),
                                        zip(args.dts[1:], errors[1:])):
        order = np.log(e_c / e_f) / np.log(dt_c / dt_f)
        print(f"observed order {dt_c:g} -> {dt_f:g}: {order:.3f}")
    slope = np.polyfit(np.log(args.dts), np.log(errors), 1)[0]
    print(f"least-squares slope: {slope:.3f}")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dt", "residual"])
            for dt, err in zip(args.dts, errors):
                writer.writerow(["%.17g" % dt, "%.17g" % err])
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
