"""Contraction behaviour of the fixed-point construction.

For each requested dissipation strength, runs the iteration from rest
forcing and prints the successive-difference table d_n together with the
observed contraction ratios.  Larger dissipation should contract faster.
"""

import argparse

from oddflow.dynamics import InitialData, build_initial
from oddflow.grid import Grid
from oddflow.picard import PicardConfig, picard_run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=32, help="grid points per axis")
    parser.add_argument("--t-end", type=float, default=0.1, help="final time")
    parser.add_argument("--dt", type=float, default=2e-3, help="time step")
    parser.add_argument("--epsilons", type=float, nargs="+",
                        default=[0.1, 0.05, 0.01],
                        help="dissipation strengths to sweep")
    parser.add_argument("--n-max", type=int, default=12,
                        help="iteration budget")
    parser.add_argument("--tol", type=float, default=1e-9,
                        help="convergence tolerance on d_n")
    args = parser.parse_args()

    grid = Grid(args.n)
    rho0, u0 = build_initial(grid, InitialData())
    for eps in args.epsilons:
        cfg = PicardConfig(eps=eps, t_end=args.t_end, dt=args.dt,
                           n_max=args.n_max, tol=args.tol)
        result = picard_run(rho0, u0, cfg)
        status = ("converged" if result.converged
                  else "diverged" if result.diverged else "stopped")
        print(f"eps={eps:g}  status={status}")
        prev = None
        for rec in result.records:
            ratio = "" if prev is None else f"  ratio={rec.d_n / prev:.4f}"
            print(f"  n={rec.n:<3d} d_n={rec.d_n:.6e}"
                  f"  residual={rec.residual_n:.3e}{ratio}")
            prev = rec.d_n
        print()


if __name__ == "__main__":
    main()
